#include "eoslab/trace_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace eos {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

std::string trace_csv_header(Index max_rank) {
  std::string h =
      "step,loss,sqrt_loss,grad_norm,eta_effective,lambda1_at_x,"
      "lambda1_at_phi,alignment,theta,G,tilde_norm";
  for (Index j = 1; j <= max_rank; ++j) {
    h += ",R_" + std::to_string(j);
  }
  h += ",stableness,stableness_lb,noise_applied";
  return h;
}

std::string trace_csv_row(const TraceRecord& rec, Index max_rank,
                          bool with_stableness) {
  std::string row = std::to_string(rec.step);
  auto add = [&row](double v) {
    row += ',';
    row += format_double(v);
  };
  auto add_empty = [&row]() { row += ','; };

  add(rec.loss);
  add(rec.sqrt_loss);
  add(rec.grad_norm);
  add(rec.eta_effective);
  if (rec.diagnosed) {
    add(rec.lambda1_at_x);
    add(rec.lambda1_at_phi);
    add(rec.obs.alignment);
    add(rec.obs.theta);
    add(rec.obs.G);
    add(rec.obs.tilde_norm);
    for (Index j = 0; j < max_rank; ++j) {
      if (j < rec.obs.R.size()) {
        add(rec.obs.R[j]);
      } else {
        add_empty();
      }
    }
    if (with_stableness) {
      add(rec.stableness);
      add(rec.stableness_lb);
    } else {
      add_empty();
      add_empty();
    }
  } else {
    for (Index j = 0; j < 6 + max_rank + 2; ++j) add_empty();
  }
  row += ',';
  row += rec.noise_applied ? '1' : '0';
  return row;
}

void write_trace_csv(const Trace& trace, const std::string& path,
                     bool with_stableness) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << trace_csv_header(trace.max_rank_columns) << '\n';
  for (const TraceRecord& rec : trace.records) {
    out << trace_csv_row(rec, trace.max_rank_columns, with_stableness) << '\n';
  }
}

void write_flow_csv(const std::vector<FlowState>& trace,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  const Index d = trace.empty() ? 0 : trace.front().x.size();
  out << "tau,lambda1,loss,grad_norm";
  for (Index i = 0; i < d; ++i) out << ",x_" << i;
  out << '\n';
  for (const FlowState& s : trace) {
    out << format_double(s.tau) << ',' << format_double(s.lambda1) << ','
        << format_double(s.loss) << ',' << format_double(s.grad_norm);
    for (Index i = 0; i < d; ++i) out << ',' << format_double(s.x[i]);
    out << '\n';
  }
}

void write_comparison_csv(const ComparisonReport& report,
                          const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "tau,gd_step,abs_distance,rel_distance,valid\n";
  for (const ComparisonSample& s : report.samples) {
    out << format_double(s.tau) << ',' << s.gd_step << ','
        << format_double(s.abs_distance) << ',' << format_double(s.rel_distance)
        << ',' << (s.valid ? '1' : '0') << '\n';
  }
}

Index CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<Index>(i);
  }
  return -1;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");

  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) table.header.push_back(cell);
  table.columns.resize(table.header.size());

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t col = 0, pos = 0;
    while (col < table.header.size()) {
      const std::size_t next = line.find(',', pos);
      const std::string field = line.substr(
          pos, next == std::string::npos ? std::string::npos : next - pos);
      double v = std::numeric_limits<double>::quiet_NaN();
      if (!field.empty()) {
        std::from_chars(field.data(), field.data() + field.size(), v);
      }
      table.columns[col].push_back(v);
      ++col;
      if (next == std::string::npos) break;
      pos = next + 1;
    }
    while (col < table.header.size()) {
      table.columns[col++].push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return table;
}

}  // namespace eos
