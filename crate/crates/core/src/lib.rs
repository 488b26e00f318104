//! Sieve estimation, forecasting and stability testing for locally stationary time series.
//!
//! The model is a time-varying autoregression
//! `x_i = phi_0(i/n) + sum_{j=1}^b phi_j(i/n) x_{i-j} + eps_i` whose coefficient
//! functions are expanded in an orthonormal basis of `L2[0, 1]`.

pub mod baseline;
pub mod basis;
pub mod design;
pub mod error;
pub mod fit;
pub mod forecast;
pub mod pacf;
pub mod report;
pub mod rng;
pub mod series;
pub mod simulate;
pub mod stability;
pub mod tuning;

pub use basis::{make_basis, Basis, BasisKind, BasisOptions};
pub use design::{build_design, DesignMatrix};
pub use error::{Error, Result};
pub use fit::{fit, SieveFit};
pub use forecast::{forecast_h, forecast_one, ForecastResult};
pub use pacf::{pacf_surface, pacf_zero_test, PacfSurface};
pub use series::TimeSeries;
pub use simulate::{simulate, Family, ModelSpec};
pub use stability::{stability_test, BootstrapOptions, StabilityTestResult, Variant};
pub use tuning::{auto_tune, TuningConfig, TuningReport};
