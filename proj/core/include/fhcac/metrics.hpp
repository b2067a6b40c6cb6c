#pragma once

#include <cstddef>
#include <deque>
#include <iosfwd>
#include <string>
#include <vector>

#include "fhcac/trainer.hpp"

namespace fhcac {

// Mean over the last min(window, count) values.
class MovingAverage {
 public:
  explicit MovingAverage(std::size_t window);
  double push(double value);
  double value() const;
  std::size_t count() const { return values_.size(); }

 private:
  std::size_t window_;
  std::deque<double> values_;
  double sum_ = 0.0;
};

// episode,return,cost_1..cost_M,lambda_1..lambda_M,ma_return,ma_cost_1..ma_cost_M[,grad_norm]
std::vector<std::string> metric_csv_header(int num_constraints, bool with_grad_norm = false);

// Writes the per-episode metric stream as CSV with moving averages.
class CsvMetricWriter final : public MetricSink {
 public:
  CsvMetricWriter(std::ostream& out, int num_constraints, std::size_t window);
  void record(const EpisodeMetrics& metrics) override;

 private:
  std::ostream& out_;
  int num_constraints_;
  MovingAverage ma_return_;
  std::vector<MovingAverage> ma_costs_;
};

struct MetricTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
  int column(const std::string& name) const;  // -1 if absent
};

// Parses a metric CSV. Throws std::runtime_error on malformed input.
MetricTable read_metric_csv(std::istream& in);

// Number of constraints implied by a metric header, or -1 if the header does
// not follow the schema.
int constraints_in_header(const std::vector<std::string>& header);

}  // namespace fhcac
