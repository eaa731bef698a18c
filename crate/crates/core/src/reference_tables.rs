//! The six published error matrices with every statistic printed beside
//! them, and a checker that recomputes those statistics from the counts.
//!
//! Class order throughout: High Intensity Urban, Low Intensity Urban,
//! Barren Land, Forest, Cultivated Crops, Woody Wetlands, Emergent
//! Herbaceous Wetlands, Open Water.

use std::fmt::Write as _;

use crate::assessment::{self, round_to, ErrorMatrix};
use crate::config::Mode;
use crate::error::Result;
use crate::raster::ClassScheme;

/// One published error matrix and the values printed around it.
#[derive(Debug, Clone, PartialEq)]
pub struct PublishedTable {
    pub system: Mode,
    pub title: &'static str,
    /// Rows classified, columns reference.
    pub counts: [[u64; 8]; 8],
    pub row_totals: [u64; 8],
    pub col_totals: [u64; 8],
    pub total: u64,
    /// Percent, two decimals.
    pub producer: [f64; 8],
    /// Percent, two decimals.
    pub user: [f64; 8],
    /// Two decimals.
    pub conditional_kappa: [f64; 8],
    /// Percent, two decimals.
    pub overall_accuracy: f64,
    /// Three decimals.
    pub overall_kappa: f64,
}

impl PublishedTable {
    pub fn matrix(&self) -> ErrorMatrix {
        let rows: Vec<Vec<u64>> = self.counts.iter().map(|r| r.to_vec()).collect();
        ErrorMatrix::from_rows(&rows, ClassScheme::everglades().names()).expect("bundled matrix is 8x8")
    }
}

pub fn published_tables() -> Vec<PublishedTable> {
    vec![
        PublishedTable {
            system: Mode::PbRnn,
            title: "Error matrix using the patch-based RNN system",
            counts: [
                [154, 2, 0, 0, 1, 0, 0, 1],
                [3, 82, 0, 0, 0, 1, 0, 1],
                [0, 0, 50, 0, 0, 0, 0, 0],
                [0, 0, 0, 118, 1, 1, 0, 0],
                [0, 0, 0, 1, 103, 0, 1, 0],
                [0, 0, 0, 3, 0, 195, 2, 2],
                [0, 0, 1, 0, 0, 2, 48, 0],
                [1, 1, 0, 1, 0, 0, 0, 155],
            ],
            row_totals: [158, 87, 50, 120, 105, 202, 51, 158],
            col_totals: [158, 85, 51, 123, 105, 199, 51, 159],
            total: 931,
            producer: [97.47, 96.47, 98.04, 95.93, 98.10, 97.99, 94.12, 97.48],
            user: [97.47, 94.25, 100.00, 98.33, 98.10, 96.53, 94.12, 98.10],
            conditional_kappa: [0.97, 0.94, 1.00, 0.98, 0.98, 0.96, 0.94, 0.98],
            overall_accuracy: 97.21,
            overall_kappa: 0.967,
        },
        PublishedTable {
            system: Mode::PixelRnn,
            title: "Error matrix using the pixel-based RNN system",
            counts: [
                [137, 13, 0, 4, 0, 1, 0, 8],
                [4, 69, 1, 6, 1, 2, 0, 3],
                [2, 1, 43, 1, 2, 0, 0, 1],
                [1, 1, 1, 101, 5, 8, 3, 3],
                [1, 0, 0, 1, 92, 1, 0, 1],
                [2, 3, 1, 10, 0, 186, 1, 1],
                [1, 1, 2, 3, 1, 6, 45, 0],
                [2, 1, 2, 0, 1, 1, 0, 143],
            ],
            row_totals: [163, 86, 50, 123, 96, 204, 59, 150],
            col_totals: [150, 89, 50, 126, 102, 205, 49, 160],
            total: 931,
            producer: [91.33, 77.53, 86.00, 80.16, 90.20, 90.73, 91.84, 89.38],
            user: [84.05, 80.23, 86.00, 82.11, 95.83, 91.18, 76.27, 95.33],
            conditional_kappa: [0.81, 0.78, 0.85, 0.79, 0.95, 0.89, 0.75, 0.94],
            overall_accuracy: 87.65,
            overall_kappa: 0.855,
        },
        PublishedTable {
            system: Mode::PixelNnSingle,
            title: "Error matrix using the pixel-based single-image NN system",
            counts: [
                [130, 36, 4, 8, 11, 4, 4, 13],
                [8, 29, 0, 0, 6, 1, 2, 4],
                [5, 0, 27, 8, 5, 1, 1, 3],
                [1, 3, 4, 50, 9, 14, 10, 1],
                [10, 10, 3, 10, 71, 3, 5, 3],
                [6, 14, 0, 43, 7, 170, 23, 7],
                [4, 0, 0, 6, 3, 5, 30, 2],
                [7, 2, 1, 0, 2, 5, 0, 130],
            ],
            row_totals: [210, 50, 50, 92, 115, 270, 50, 147],
            col_totals: [171, 94, 39, 125, 114, 203, 75, 163],
            total: 984,
            producer: [76.02, 30.85, 69.23, 40.00, 62.28, 83.74, 40.00, 79.75],
            user: [61.90, 58.00, 54.00, 54.35, 61.74, 62.96, 60.00, 88.44],
            conditional_kappa: [0.54, 0.54, 0.52, 0.48, 0.57, 0.53, 0.57, 0.86],
            overall_accuracy: 64.74,
            overall_kappa: 0.583,
        },
        PublishedTable {
            system: Mode::PixelNnMulti,
            title: "Error matrix using the pixel-based multi-image NN system",
            counts: [
                [136, 30, 6, 7, 9, 2, 5, 17],
                [7, 29, 1, 2, 6, 1, 1, 3],
                [3, 1, 34, 5, 5, 0, 0, 2],
                [3, 1, 2, 46, 7, 12, 7, 0],
                [9, 6, 5, 15, 75, 8, 2, 0],
                [6, 10, 0, 46, 12, 173, 33, 5],
                [1, 0, 1, 7, 3, 5, 33, 0],
                [6, 2, 2, 1, 2, 2, 0, 134],
            ],
            row_totals: [212, 50, 50, 78, 120, 285, 50, 149],
            col_totals: [171, 79, 51, 129, 119, 203, 81, 161],
            total: 994,
            producer: [79.53, 36.71, 66.67, 35.66, 63.03, 85.22, 40.74, 83.23],
            user: [64.15, 58.00, 68.00, 58.97, 62.50, 60.70, 66.00, 89.93],
            conditional_kappa: [0.57, 0.54, 0.66, 0.53, 0.57, 0.51, 0.63, 0.88],
            overall_accuracy: 66.40,
            overall_kappa: 0.602,
        },
        PublishedTable {
            system: Mode::PatchNnSingle,
            title: "Error matrix using the patch-based single-image NN system",
            counts: [
                [135, 28, 3, 5, 5, 3, 0, 3],
                [12, 48, 1, 2, 5, 0, 0, 1],
                [4, 0, 31, 4, 4, 1, 2, 4],
                [3, 9, 2, 72, 10, 15, 14, 0],
                [8, 3, 4, 1, 86, 2, 2, 1],
                [4, 6, 0, 27, 2, 168, 13, 2],
                [1, 0, 0, 1, 2, 8, 37, 1],
                [1, 0, 3, 1, 2, 1, 0, 152],
            ],
            row_totals: [182, 69, 50, 125, 107, 222, 50, 160],
            col_totals: [168, 94, 44, 113, 116, 198, 68, 164],
            total: 965,
            producer: [80.36, 51.06, 70.45, 63.72, 74.14, 84.85, 54.41, 92.68],
            user: [74.18, 69.57, 62.00, 57.60, 80.37, 75.68, 74.00, 95.00],
            conditional_kappa: [0.69, 0.66, 0.60, 0.52, 0.78, 0.69, 0.72, 0.94],
            overall_accuracy: 75.54,
            overall_kappa: 0.712,
        },
        PublishedTable {
            system: Mode::PatchNnMulti,
            title: "Error matrix using the patch-based multi-image NN system",
            counts: [
                [141, 21, 4, 9, 4, 2, 0, 5],
                [10, 47, 2, 2, 4, 2, 1, 0],
                [3, 0, 33, 4, 4, 0, 2, 4],
                [1, 2, 4, 78, 8, 21, 12, 0],
                [2, 1, 1, 5, 89, 5, 7, 1],
                [4, 1, 0, 21, 1, 170, 19, 3],
                [0, 0, 1, 4, 2, 1, 42, 0],
                [5, 1, 1, 0, 0, 0, 0, 153],
            ],
            row_totals: [186, 68, 50, 126, 111, 219, 50, 160],
            col_totals: [166, 73, 46, 123, 112, 201, 83, 166],
            total: 970,
            producer: [84.94, 64.38, 71.74, 63.41, 79.46, 84.58, 50.60, 92.17],
            user: [75.81, 69.12, 66.00, 61.90, 80.18, 77.63, 84.00, 95.62],
            conditional_kappa: [0.71, 0.67, 0.64, 0.56, 0.78, 0.72, 0.83, 0.95],
            overall_accuracy: 77.63,
            overall_kappa: 0.737,
        },
    ]
}

/// The published six-system summary, columns in [`Mode::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct PublishedSummary {
    pub systems: [Mode; 6],
    /// Rows: classes; columns: systems (conditional kappa, two decimals).
    pub class_kappa: [[f64; 6]; 8],
    /// Per-class mean and standard deviation across the systems.
    pub class_mean: [f64; 8],
    pub class_sd: [f64; 8],
    pub mean_kappa: [f64; 6],
    pub kappa_sd: [f64; 6],
    pub overall_accuracy: [f64; 6],
    pub overall_kappa: [f64; 6],
}

pub fn published_summary() -> PublishedSummary {
    PublishedSummary {
        systems: Mode::ALL,
        class_kappa: [
            [0.54, 0.57, 0.69, 0.71, 0.81, 0.97],
            [0.54, 0.54, 0.66, 0.67, 0.78, 0.94],
            [0.52, 0.66, 0.60, 0.64, 0.85, 1.00],
            [0.48, 0.53, 0.52, 0.56, 0.79, 0.98],
            [0.57, 0.57, 0.78, 0.78, 0.95, 0.98],
            [0.53, 0.51, 0.69, 0.72, 0.89, 0.96],
            [0.57, 0.63, 0.72, 0.83, 0.75, 0.94],
            [0.86, 0.88, 0.94, 0.95, 0.94, 0.98],
        ],
        class_mean: [0.72, 0.69, 0.71, 0.64, 0.77, 0.72, 0.74, 0.93],
        class_sd: [0.16, 0.15, 0.18, 0.20, 0.18, 0.18, 0.13, 0.05],
        mean_kappa: [0.58, 0.61, 0.70, 0.73, 0.84, 0.97],
        kappa_sd: [0.12, 0.12, 0.12, 0.12, 0.08, 0.02],
        overall_accuracy: [64.74, 66.40, 75.54, 77.63, 87.65, 97.21],
        overall_kappa: [0.58, 0.60, 0.71, 0.74, 0.86, 0.97],
    }
}

/// One printed value that the recomputation does not reproduce.
#[derive(Debug, Clone, PartialEq)]
pub struct Mismatch {
    pub statistic: String,
    pub class: Option<usize>,
    pub printed: f64,
    pub computed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableCheck {
    pub name: String,
    pub values_checked: usize,
    pub mismatches: Vec<Mismatch>,
}

impl TableCheck {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }

    pub fn summary_line(&self) -> String {
        let mut s = format!(
            "{}: {} ({} values, {} mismatches)",
            self.name,
            if self.passed() { "PASS" } else { "FAIL" },
            self.values_checked,
            self.mismatches.len()
        );
        for m in &self.mismatches {
            let _ = write!(
                s,
                "\n    {}{}: printed {} computed {}",
                m.statistic,
                m.class.map_or(String::new(), |c| format!("[class {c}]")),
                m.printed,
                m.computed
            );
        }
        s
    }
}

struct Checker {
    check: TableCheck,
}

impl Checker {
    fn new(name: String) -> Self {
        Checker {
            check: TableCheck {
                name,
                values_checked: 0,
                mismatches: Vec::new(),
            },
        }
    }

    fn value(&mut self, statistic: &str, class: Option<usize>, printed: f64, computed: f64, tolerance: f64) {
        self.check.values_checked += 1;
        if !((printed - computed).abs() <= tolerance) {
            self.check.mismatches.push(Mismatch {
                statistic: statistic.to_string(),
                class,
                printed,
                computed,
            });
        }
    }
}

/// Half a unit in the last printed digit, plus float slack. A printed
/// value agrees with a computed one when rounding the computed value to
/// the printed precision can give the printed digits; exact ties may be
/// printed either way (153/160 = 95.625% appears as 95.62).
fn half_unit(decimals: i32) -> f64 {
    0.5 * 10f64.powi(-decimals) + 1e-9
}

/// Recomputes every printed statistic of one table from its counts and
/// compares it with the printed value at the printed precision. Totals
/// are compared exactly.
pub fn verify_table(t: &PublishedTable) -> Result<TableCheck> {
    let m = t.matrix();
    let report = assessment::full_report(&m)?;
    let mut c = Checker::new(t.system.name().to_string());
    c.value("N", None, t.total as f64, m.total() as f64, 0.0);
    let pct = |v: Option<f64>| v.map_or(f64::NAN, |x| 100.0 * x);
    for i in 0..8 {
        c.value("row_total", Some(i), t.row_totals[i] as f64, report.row_totals[i] as f64, 0.0);
        c.value("col_total", Some(i), t.col_totals[i] as f64, report.col_totals[i] as f64, 0.0);
        c.value("PA", Some(i), t.producer[i], pct(report.producer_accuracy[i]), half_unit(2));
        c.value("UA", Some(i), t.user[i], pct(report.user_accuracy[i]), half_unit(2));
        let k = report.conditional_kappa[i].unwrap_or(f64::NAN);
        c.value("conditional_kappa", Some(i), t.conditional_kappa[i], k, half_unit(2));
    }
    c.value("OA", None, t.overall_accuracy, 100.0 * report.overall_accuracy, half_unit(2));
    let kappa = report.overall_kappa.unwrap_or(f64::NAN);
    c.value("KAPPA", None, t.overall_kappa, kappa, half_unit(3));
    Ok(c.check)
}

/// Summary values are derived from already-rounded table entries, so
/// they may differ from a recomputation by one unit in the last digit.
const SUMMARY_TOLERANCE: f64 = 0.01 + 1e-9;

/// Checks the six-system summary against the six tables: its per-class
/// kappas exactly, its means, deviations and overall figures to within
/// one unit of the last printed digit.
pub fn verify_summary(tables: &[PublishedTable], summary: &PublishedSummary) -> Result<TableCheck> {
    let mut c = Checker::new("summary".into());
    let mut displayed = [[0.0; 6]; 8];
    for (col, mode) in summary.systems.iter().enumerate() {
        let Some(t) = tables.iter().find(|t| t.system == *mode) else {
            c.value("table present", Some(col), 1.0, 0.0, 0.0);
            continue;
        };
        let report = assessment::full_report(&t.matrix())?;
        for i in 0..8 {
            let k = report.conditional_kappa[i].map_or(f64::NAN, |k| round_to(k, 2));
            displayed[i][col] = k;
            c.value("class_kappa", Some(i), summary.class_kappa[i][col], k, 1e-9);
        }
        c.value("mean_kappa", Some(col), summary.mean_kappa[col], report.mean_kappa.unwrap_or(f64::NAN), SUMMARY_TOLERANCE);
        c.value("kappa_sd", Some(col), summary.kappa_sd[col], report.kappa_sd.unwrap_or(f64::NAN), SUMMARY_TOLERANCE);
        c.value("OA", Some(col), summary.overall_accuracy[col], 100.0 * report.overall_accuracy, half_unit(2));
        c.value(
            "overall_kappa",
            Some(col),
            summary.overall_kappa[col],
            report.overall_kappa.unwrap_or(f64::NAN),
            SUMMARY_TOLERANCE,
        );
    }
    for i in 0..8 {
        let (mean, sd) = assessment::mean_and_sd(&displayed[i]);
        c.value("class_mean", Some(i), summary.class_mean[i], mean.unwrap_or(f64::NAN), SUMMARY_TOLERANCE);
        c.value("class_sd", Some(i), summary.class_sd[i], sd.unwrap_or(f64::NAN), SUMMARY_TOLERANCE);
    }
    Ok(c.check)
}

/// Every bundled table followed by the summary.
pub fn verify_all() -> Result<Vec<TableCheck>> {
    let tables = published_tables();
    let mut out = tables.iter().map(verify_table).collect::<Result<Vec<_>>>()?;
    out.push(verify_summary(&tables, &published_summary())?);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_bundled_tables_reproduce() {
        for check in verify_all().unwrap() {
            assert!(check.passed(), "{}", check.summary_line());
        }
    }

    #[test]
    fn hand_worked_values() {
        let t = &published_tables()[0];
        let m = t.matrix();
        let chance: u64 = (0..8).map(|i| m.row_total(i) * m.col_total(i)).sum();
        assert_eq!(chance, 128_615);
        assert_eq!(m.diagonal_sum(), 905);
        let k = assessment::overall_kappa(&m).unwrap();
        assert!((k - 713_940.0 / 738_146.0).abs() < 1e-15);
        let k0 = assessment::conditional_kappa(&m, 0).unwrap();
        assert!((k0 - 118_410.0 / 122_134.0).abs() < 1e-15);
        let k1 = assessment::conditional_kappa(&m, 1).unwrap();
        assert!((k1 - 68_947.0 / 73_602.0).abs() < 1e-15);
        assert_eq!(assessment::conditional_kappa(&m, 2).unwrap(), 1.0);
    }

    #[test]
    fn any_single_count_change_is_detected() {
        for t in published_tables() {
            for i in 0..8 {
                for j in 0..8 {
                    for delta in [-1i64, 1] {
                        let mut p = t.clone();
                        let v = p.counts[i][j] as i64 + delta;
                        if v < 0 {
                            continue;
                        }
                        p.counts[i][j] = v as u64;
                        assert!(!verify_table(&p).unwrap().passed(), "{} [{i}][{j}] {delta:+}", t.system);
                    }
                }
            }
        }
    }
}
