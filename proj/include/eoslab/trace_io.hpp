#pragma once

#include <string>
#include <vector>

#include "eoslab/flow.hpp"
#include "eoslab/optimizer.hpp"

namespace eos {

/// Shortest decimal representation that round-trips the double exactly.
std::string format_double(double v);

/// Header for a trace CSV carrying max_rank R_j columns.
std::string trace_csv_header(Index max_rank);

/// One CSV row; diagnostic columns of undiagnosed steps stay empty.
std::string trace_csv_row(const TraceRecord& rec, Index max_rank,
                          bool with_stableness);

void write_trace_csv(const Trace& trace, const std::string& path,
                     bool with_stableness);

void write_flow_csv(const std::vector<FlowState>& trace,
                    const std::string& path);

void write_comparison_csv(const ComparisonReport& report,
                          const std::string& path);

/// Column-oriented view of a CSV file, for plotting.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;  // NaN marks empty cells
  Index column(const std::string& name) const;  // -1 when missing
};

CsvTable read_csv(const std::string& path);

}  // namespace eos
