//! Post-hoc analyses of counterfactual sets: luminance statistics, image
//! similarity, attribute co-occurrence bias counts, and front reports.

pub mod bias;
pub mod metrics;
pub mod report;

pub use bias::{bias_table, BiasTable};
pub use metrics::{class_luminance_map, diff_heatmap, luminance, luminance_unit, ssim};
pub use report::{front_report, FrontReport, MemberReport};
