#pragma once

#include <string>

#include "jtens/dataset.hpp"
#include "jtens/diagnostics.hpp"
#include "jtens/trainer.hpp"

// Numeric CSV ingestion and the plot-ready result emitters. All writers are
// atomic (temp file + rename) and format doubles with 17 significant digits,
// so identical runs produce byte-identical artifacts and every value
// round-trips exactly.

namespace jtens {

// Reads a numeric CSV with a header row. The named label column becomes the
// labels (classification: non-negative integers) or targets (regression);
// every other column becomes a feature, in header order. Rows keep file
// order. The parsed table lands in the training split; the test split stays
// empty so callers can pair two files into one dataset.
RawDataset load_csv(const std::string& path, const std::string& label_column,
                    bool regression = false);

// Per-epoch training curves. Columns, in order: epoch, lambda, ensemble_kl,
// avg_member_kl, diversity, ensemble_train_err, ensemble_val_err,
// ensemble_test_err, then member_train_err_<j> and member_test_err_<j> for
// each member j. ensemble_val_err is "nan" when no validation split exists.
void write_trace_csv(const std::string& path, const TrainingTrace& trace);

// Restores the per-epoch columns written by write_trace_csv (exactly, via
// the 17-digit round trip). The manifest and best-epoch marker live in the
// run manifest, not the CSV, so they come back defaulted.
TrainingTrace trace_from_csv(const std::string& path);

// Columns: keep_count, mean_error, std_error.
void write_robustness_csv(const std::string& path, const RobustnessCurve& curve);

}  // namespace jtens
