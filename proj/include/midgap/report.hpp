#pragma once
#include <string>
#include <vector>

#include "midgap/evaluator.hpp"

namespace midgap {

// CSV columns: model,t,psnr,ssim,count (infinite PSNR serialized as "inf")
void write_series_csv(const std::vector<MetricSeries>& series, const std::string& path);
std::vector<MetricSeries> read_series_csv(const std::string& path);

// Writes metrics.csv, psnr.svg and ssim.svg (one polyline per model), and a
// strip_<model>.pgm/ppm frame grid for every series that carries samples.
// Deterministic: identical input produces byte-identical files.
void write_report(const std::vector<MetricSeries>& series, const std::string& out_dir);

}  // namespace midgap
