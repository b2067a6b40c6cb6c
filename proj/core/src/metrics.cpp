#include "fhcac/metrics.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace fhcac {

MovingAverage::MovingAverage(std::size_t window) : window_(window) {
  if (window_ == 0) throw std::invalid_argument("MovingAverage: window must be at least 1");
}

double MovingAverage::push(double value) {
  values_.push_back(value);
  sum_ += value;
  if (values_.size() > window_) {
    sum_ -= values_.front();
    values_.pop_front();
  }
  return this->value();
}

double MovingAverage::value() const {
  return values_.empty() ? 0.0 : sum_ / static_cast<double>(values_.size());
}

std::vector<std::string> metric_csv_header(int num_constraints, bool with_grad_norm) {
  std::vector<std::string> h{"episode", "return"};
  for (int k = 1; k <= num_constraints; ++k) h.push_back("cost_" + std::to_string(k));
  for (int k = 1; k <= num_constraints; ++k) h.push_back("lambda_" + std::to_string(k));
  h.push_back("ma_return");
  for (int k = 1; k <= num_constraints; ++k) h.push_back("ma_cost_" + std::to_string(k));
  if (with_grad_norm) h.push_back("grad_norm");
  return h;
}

namespace {

// Shortest representation that parses back to the same double.
void write_double(std::ostream& out, double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  out.write(buf, res.ptr - buf);
}

}  // namespace

CsvMetricWriter::CsvMetricWriter(std::ostream& out, int num_constraints, std::size_t window)
    : out_(out), num_constraints_(num_constraints), ma_return_(window), ma_costs_(num_constraints, MovingAverage(window)) {
  const auto header = metric_csv_header(num_constraints);
  for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << '\n';
}

void CsvMetricWriter::record(const EpisodeMetrics& m) {
  if (static_cast<int>(m.constraint_costs.size()) != num_constraints_)
    throw std::invalid_argument("CsvMetricWriter: constraint count mismatch");
  out_ << m.episode << ',';
  write_double(out_, m.total_reward);
  for (double c : m.constraint_costs) out_ << ',', write_double(out_, c);
  for (double l : m.lambda) out_ << ',', write_double(out_, l);
  out_ << ',';
  write_double(out_, ma_return_.push(m.total_reward));
  for (int k = 0; k < num_constraints_; ++k) out_ << ',', write_double(out_, ma_costs_[k].push(m.constraint_costs[k]));
  out_ << '\n';
}

int MetricTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

MetricTable read_metric_csv(std::istream& in) {
  MetricTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("metric csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.header = split_csv_line(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != table.header.size())
      throw std::runtime_error("metric csv: line " + std::to_string(line_no) + " has the wrong number of fields");
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) {
      double x = 0.0;
      const auto res = std::from_chars(f.data(), f.data() + f.size(), x);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size())
        throw std::runtime_error("metric csv: bad number '" + f + "' on line " + std::to_string(line_no));
      row.push_back(x);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

int constraints_in_header(const std::vector<std::string>& header) {
  for (int m = 0; 3 * m + 3 <= static_cast<int>(header.size()); ++m) {
    auto expected = metric_csv_header(m);
    if (header == expected) return m;
    expected = metric_csv_header(m, true);
    if (header == expected) return m;
  }
  return -1;
}

}  // namespace fhcac
