//! IO side of kpiprobe: the CPE emulator, the three collectors, the
//! campaign scheduler and the export/report writers.

pub mod campaign;
pub mod cli;
pub mod clock;
pub mod collect;
pub mod config;
pub mod emulator;
pub mod export;
pub mod report;
