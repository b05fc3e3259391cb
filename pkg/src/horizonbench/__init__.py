"""Forecasting benchmark for daily stock prices.

Four models (LSTM, GRU, ARMA, ARIMA), each built from first principles, are
evaluated with rolling one-step forecasts over short (1y), medium (2.5y) and
long (5y) horizons, preceded by ADF stationarity testing and trend/residual
decomposition of the input series.
"""

from .arma import (
    ArimaModel,
    ArmaError,
    ArmaParams,
    ResidualTrace,
    css_residuals,
    fit_arima,
    fit_arma,
    forecast,
    nelder_mead,
    rolling_one_step,
    select_order,
    select_pq,
)
from .bench import (
    BenchConfig,
    BenchmarkReport,
    ConfigError,
    emit_config,
    emit_report,
    load_config,
    load_table,
    run_benchmark,
)
from .market_data import (
    FetchError,
    MarketDataError,
    OhlcvBar,
    Series,
    SummaryStats,
    TimeSeriesTable,
    fetch_ohlcv,
    parse_ohlcv_csv,
    select_series,
    summarize,
    table_to_csv,
)
from .metrics import MetricError, MetricReport, evaluate, mae, mape, mse, r2, rmse
from .preprocess import (
    DifferencedSeries,
    Horizon,
    HorizonSplit,
    MinMaxScaler,
    PreprocessError,
    ScaledSeries,
    WindowedDataset,
    difference,
    fit_minmax,
    horizon_split,
    integrate,
    make_windows,
    scale_series,
)
from .recurrent import (
    GruParams,
    LstmParams,
    LstmState,
    RecurrentError,
    RecurrentNetwork,
    TrainConfig,
    adam_step,
    bptt_gradients,
    create_network,
    forward,
    forward_batch,
    grad_check,
    gru_cell,
    lstm_cell,
    train,
)
from .stationarity import (
    AdfResult,
    Decomposition,
    OlsFit,
    StationarityError,
    adf_test,
    decompose,
    ols_fit,
)

__version__ = "0.1.0"
