pub mod duality;
pub mod gap_classification;
pub mod gap_regression;
pub mod metrics_table;
pub mod train_sweep;
pub mod vc_shatter;
pub mod vrho_asymptotics;
