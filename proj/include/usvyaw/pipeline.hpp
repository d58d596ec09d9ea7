#pragma once

#include "usvyaw/estim.hpp"
#include "usvyaw/signals.hpp"

namespace usvyaw {

struct IdentificationResult {
  TimeSeriesDataset train;
  TimeSeriesDataset test;
  InitializerResult initializer;
  EstimationReport report;
  double validation_fit_percent = 0.0;
};

/// Options used by identify() unless the caller supplies its own: the
/// defaults plus the nuisance yaw offset, which detrend makes necessary on
/// noisy logs.
inline EstimationOptions pipeline_options() {
  EstimationOptions opts;
  opts.estimate_output_offset = true;
  return opts;
}

/// detrend -> contiguous split -> equation-error start -> output-error
/// refinement on the training part -> free-run validation on the held-out
/// part. The held-out simulation starts from rest at the beginning of the
/// record and runs through the training inputs first, so the segment is
/// scored with the state the model itself predicts at the split.
inline IdentificationResult identify(const TimeSeriesDataset& ds, double train_fraction = 0.5,
                                     const EstimationOptions& opts = pipeline_options()) {
  auto [train, test] = split_dataset(detrend(ds), train_fraction);
  auto init = equation_error_init(train);
  auto report = estimate_output_error(train, init.model, opts);
  const double validation = cross_validate(report.model, test, train.input_u().values());
  return {std::move(train), std::move(test), std::move(init), std::move(report), validation};
}

}  // namespace usvyaw
