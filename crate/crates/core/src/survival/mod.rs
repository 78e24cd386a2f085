//! Survival statistics: Cox partial likelihood, concordance, Kaplan-Meier,
//! log-rank, time-dependent ROC, risk splits and LASSO-Cox.

pub mod cindex;
pub mod cox;
pub mod km;
pub mod lasso;
pub mod logrank;
pub mod roc;
pub mod split;

pub use cindex::{concordance, concordance_index, Concordance};
pub use km::{kaplan_meier, KmCurve};
pub use lasso::{fit_lasso_cox, lasso_cox_path, CoxFit, LassoCoxConfig, PathPoint};
pub use logrank::{log_rank, LogRank};
pub use roc::{time_dependent_roc, TimeRoc};
pub use split::{median, median_risk_split};
