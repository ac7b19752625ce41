// CSV formats. Every table carries a header row; floats are printed with 17
// significant digits so a round trip reproduces the exact double.
#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "umarkov/ergodicity.hpp"
#include "umarkov/errors.hpp"
#include "umarkov/models.hpp"
#include "umarkov/oracle.hpp"
#include "umarkov/semigroup.hpp"

namespace umarkov {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string run_csv(const SemigroupRun& run) {
  std::string out = "t,state_index,value,argmax_control\n";
  for (std::size_t j = 0; j < run.time_grid.size(); ++j)
    for (std::size_t k = 0; k < run.iterates[j].size(); ++k) {
      out += format_double(run.time_grid[j]);
      out += ',';
      out += std::to_string(k);
      out += ',';
      out += format_double(run.iterates[j][k]);
      out += ',';
      out += std::to_string(run.argmax_field[j][k]);
      out += '\n';
    }
  return out;
}

inline std::string policy_csv(const MarkovPolicy& policy, const ControlGrid& grid) {
  std::string out = "cell_start,cell_end,state_index,control_label\n";
  for (std::size_t c = 0; c < policy.n_cells(); ++c)
    for (std::size_t k = 0; k < policy.choice[c].size(); ++k) {
      out += format_double(policy.cell_boundaries[c]);
      out += ',';
      out += format_double(policy.cell_boundaries[c + 1]);
      out += ',';
      out += std::to_string(k);
      out += ',';
      out += grid.point(static_cast<std::size_t>(policy.choice[c][k])).label;
      out += '\n';
    }
  return out;
}

inline std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "jump_time,state_index\n";
  out += format_double(0.0);
  out += ',';
  out += std::to_string(traj.states.front());
  out += '\n';
  for (std::size_t j = 0; j < traj.jump_times.size(); ++j) {
    out += format_double(traj.jump_times[j]);
    out += ',';
    out += std::to_string(traj.states[j + 1]);
    out += '\n';
  }
  return out;
}

struct EstimateRow {
  Configuration state;
  EstimateReport report;
};

inline std::string estimate_csv(const std::vector<EstimateRow>& rows) {
  std::string out = "state,mean,stderr,n\n";
  for (const auto& row : rows) {
    out += std::to_string(row.state);
    out += ',';
    out += format_double(row.report.mean);
    out += ',';
    out += format_double(row.report.standard_error);
    out += ',';
    out += std::to_string(row.report.n_samples);
    out += '\n';
  }
  return out;
}

inline std::string probe_csv(const std::vector<ProbeRow>& rows) {
  std::string out = "t,sup_gap\n";
  for (const auto& row : rows) {
    out += format_double(row.t);
    out += ',';
    out += format_double(row.sup_gap);
    out += '\n';
  }
  return out;
}

inline std::string value_csv(const StateFunction& f) {
  std::string out = "state_index,value\n";
  for (std::size_t k = 0; k < f.size(); ++k) {
    out += std::to_string(k);
    out += ',';
    out += format_double(f[k]);
    out += '\n';
  }
  return out;
}

inline std::string stationary_csv(const std::vector<Distribution>& dists) {
  std::string out = "distribution_index,state_index,weight\n";
  for (std::size_t d = 0; d < dists.size(); ++d)
    for (std::size_t k = 0; k < dists[d].weights.size(); ++k) {
      out += std::to_string(d);
      out += ',';
      out += std::to_string(k);
      out += ',';
      out += format_double(dists[d].weights[k]);
      out += '\n';
    }
  return out;
}

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline double parse_field_double(std::string_view field, int line_no) {
  field = trim(field);
  double v = 0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    throw ParseError("cannot parse '" + std::string(field) + "' as a number", line_no, 0);
  return v;
}

inline long parse_field_long(std::string_view field, int line_no) {
  field = trim(field);
  long v = 0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    throw ParseError("cannot parse '" + std::string(field) + "' as an integer", line_no, 0);
  return v;
}

// Non-empty data lines of a CSV body, header skipped; yields (line_no, line).
inline std::vector<std::pair<int, std::string_view>> csv_data_lines(std::string_view text) {
  std::vector<std::pair<int, std::string_view>> lines;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    std::string_view line =
        nl == std::string_view::npos ? text.substr(pos) : text.substr(pos, nl - pos);
    ++line_no;
    if (!trim(line).empty() && line_no > 1) lines.emplace_back(line_no, line);
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return lines;
}

}  // namespace detail

// Reads the policy_csv format back. Cells must tile [0, horizon] and every
// cell must list every state exactly once; labels resolve through the grid.
inline MarkovPolicy read_policy_csv(std::string_view text, const UncertainGenerator& gen) {
  struct Cell {
    double start, end;
    std::vector<int> choice;
    std::vector<char> seen;
  };
  std::vector<Cell> cells;
  for (auto [line_no, line] : detail::csv_data_lines(text)) {
    auto fields = detail::split_csv_line(line);
    if (fields.size() != 4)
      throw ParseError("expected 4 fields (cell_start,cell_end,state_index,control_label)", line_no, 0);
    double start = detail::parse_field_double(fields[0], line_no);
    double end = detail::parse_field_double(fields[1], line_no);
    long state = detail::parse_field_long(fields[2], line_no);
    std::string label(detail::trim(fields[3]));
    if (state < 0 || static_cast<std::uint64_t>(state) >= gen.n_states())
      throw ParseError("state index " + std::to_string(state) + " out of range", line_no, 0);
    std::size_t ci = cells.size();
    for (std::size_t c = 0; c < cells.size(); ++c)
      if (cells[c].start == start && cells[c].end == end) {
        ci = c;
        break;
      }
    if (ci == cells.size())
      cells.push_back({start, end, std::vector<int>(gen.n_states(), 0),
                       std::vector<char>(gen.n_states(), 0)});
    Cell& cell = cells[ci];
    if (cell.seen[static_cast<std::size_t>(state)])
      throw ParseError("state " + std::to_string(state) + " listed twice in one cell", line_no, 0);
    cell.seen[static_cast<std::size_t>(state)] = 1;
    cell.choice[static_cast<std::size_t>(state)] =
        static_cast<int>(gen.speed().grid().index_of(label));
  }
  if (cells.empty()) throw ParseError("policy file has no data rows");
  std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) { return a.start < b.start; });
  MarkovPolicy policy;
  policy.cell_boundaries.push_back(cells.front().start);
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (c > 0 && cells[c].start != cells[c - 1].end)
      throw ParseError("policy cells do not tile the horizon");
    for (std::uint32_t k = 0; k < gen.n_states(); ++k)
      if (!cells[c].seen[k])
        throw ParseError("cell starting at " + format_double(cells[c].start) + " misses state " +
                         std::to_string(k));
    policy.cell_boundaries.push_back(cells[c].end);
    policy.choice.push_back(std::move(cells[c].choice));
  }
  validate_policy(gen, policy);
  return policy;
}

// Reads the value_csv format (state_index,value); every state must appear
// exactly once.
inline StateFunction read_function_csv(std::string_view text, std::uint32_t n_states) {
  StateFunction f(n_states, 0.0);
  std::vector<char> seen(n_states, 0);
  for (auto [line_no, line] : detail::csv_data_lines(text)) {
    auto fields = detail::split_csv_line(line);
    if (fields.size() != 2) throw ParseError("expected 2 fields (state_index,value)", line_no, 0);
    long state = detail::parse_field_long(fields[0], line_no);
    if (state < 0 || static_cast<std::uint64_t>(state) >= n_states)
      throw ParseError("state index " + std::to_string(state) + " out of range", line_no, 0);
    if (seen[static_cast<std::size_t>(state)])
      throw ParseError("state " + std::to_string(state) + " listed twice", line_no, 0);
    seen[static_cast<std::size_t>(state)] = 1;
    f[static_cast<std::size_t>(state)] = detail::parse_field_double(fields[1], line_no);
  }
  for (std::uint32_t k = 0; k < n_states; ++k)
    if (!seen[k]) throw ParseError("function file misses state " + std::to_string(k));
  return f;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace umarkov
