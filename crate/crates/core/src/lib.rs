//! Report-level climate narrative analysis: paragraph extraction and keyword
//! filtering, four-axis classification, threshold aggregation per firm,
//! firm-attribute joins, ordinal statistics and typology clustering.

pub mod aggregate;
pub mod classify;
pub mod cluster;
pub mod corpus;
pub mod firms;
pub mod keywords;
pub mod pipeline;
pub mod report;
pub mod stats;
