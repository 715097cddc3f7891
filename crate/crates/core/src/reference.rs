//! Published results of the 1–K–1 Elman RI detector on JTWC best-track data,
//! kept as fixtures for consistency checks and for side-by-side reporting.

use crate::besttrack::Basin;
use crate::extraction::{ClassCounts, Strategy};
use crate::metrics::ConfusionMatrix;

/// Strategy I window counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCounts {
    pub basin: Basin,
    pub train: ClassCounts,
    pub test: ClassCounts,
    /// Cyclones in the train/test year ranges.
    pub train_cyclones: usize,
    pub test_cyclones: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceResult {
    pub basin: Basin,
    pub strategy: Strategy,
    /// Test percentage over 30 runs, mean and standard deviation.
    pub mean: f64,
    pub std_dev: f64,
    /// Best of the 30 runs.
    pub best_run: ConfusionMatrix,
}

pub const COUNTS: [ReferenceCounts; 2] = [
    ReferenceCounts {
        basin: Basin::SouthPacific,
        train: ClassCounts {
            positive: 155,
            negative: 4798,
        },
        test: ClassCounts {
            positive: 7,
            negative: 2002,
        },
        train_cyclones: 219,
        test_cyclones: 71,
    },
    ReferenceCounts {
        basin: Basin::SouthIndian,
        train: ClassCounts {
            positive: 190,
            negative: 6887,
        },
        test: ClassCounts {
            positive: 70,
            negative: 6676,
        },
        train_cyclones: 285,
        test_cyclones: 190,
    },
];

pub const RESULTS: [ReferenceResult; 4] = [
    ReferenceResult {
        basin: Basin::SouthPacific,
        strategy: Strategy::I,
        mean: 97.214,
        std_dev: 0.013,
        best_run: ConfusionMatrix::new(0, 7, 2, 1999),
    },
    ReferenceResult {
        basin: Basin::SouthIndian,
        strategy: Strategy::I,
        mean: 97.390,
        std_dev: 0.008,
        best_run: ConfusionMatrix::new(0, 70, 7, 6669),
    },
    ReferenceResult {
        basin: Basin::SouthPacific,
        strategy: Strategy::II,
        mean: 79.779,
        std_dev: 0.169,
        best_run: ConfusionMatrix::new(50, 308, 66, 1452),
    },
    ReferenceResult {
        basin: Basin::SouthIndian,
        strategy: Strategy::II,
        mean: 81.736,
        std_dev: 0.219,
        best_run: ConfusionMatrix::new(381, 837, 316, 4835),
    },
];

pub fn counts(basin: Basin) -> Option<&'static ReferenceCounts> {
    COUNTS.iter().find(|c| c.basin == basin)
}

pub fn result(basin: Basin, strategy: Strategy) -> Option<&'static ReferenceResult> {
    RESULTS
        .iter()
        .find(|r| r.basin == basin && r.strategy == strategy)
}

/// Default season splits per basin.
pub fn default_years(basin: Basin) -> Option<((i32, i32), (i32, i32))> {
    match basin {
        Basin::SouthPacific => Some(((1985, 2005), (2006, 2013))),
        Basin::SouthIndian => Some(((1985, 2001), (2002, 2013))),
        Basin::Other => None,
    }
}
