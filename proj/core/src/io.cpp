#include "topoinfer/io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "topoinfer/eval.hpp"
#include "topoinfer/forward.hpp"

namespace topoinfer {

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw InvalidInput("cannot open for writing: " + path);
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidInput("cannot open for reading: " + path);
  return f;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  return out;
}

void expect_header(std::istream& in, const std::string& expected, const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(what + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expected)
    throw InvalidInput(what + ": expected header '" + expected + "', got '" + line + "'");
}

}  // namespace

void write_observations_csv(std::ostream& out, const ObservationSet& obs) {
  out << "slot,node,data_count,ack_count\n";
  const int k_slots = obs.n_slots();
  for (int k = 0; k < k_slots; ++k)
    for (int i = 0; i < obs.n_nodes; ++i)
      out << (k + 1) << ',' << (i + 1) << ',' << obs.data[i].counts[k] << ','
          << obs.acks[i].counts[k] << '\n';
}

void write_observations_csv(const std::string& path, const ObservationSet& obs) {
  auto f = open_out(path);
  write_observations_csv(f, obs);
}

ObservationSet read_observations_csv(std::istream& in, double slot_duration) {
  expect_header(in, "slot,node,data_count,ack_count", "observations csv");
  struct Row {
    int slot, node, data, ack;
  };
  std::vector<Row> rows;
  int max_slot = 0, max_node = 0;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 4)
      throw InvalidInput("observations csv: line " + std::to_string(line_no) +
                         ": expected 4 fields");
    Row r{std::stoi(f[0]), std::stoi(f[1]), std::stoi(f[2]), std::stoi(f[3])};
    if (r.slot < 1 || r.node < 1)
      throw InvalidInput("observations csv: line " + std::to_string(line_no) +
                         ": slot and node are 1-based");
    max_slot = std::max(max_slot, r.slot);
    max_node = std::max(max_node, r.node);
    rows.push_back(r);
  }
  if (rows.empty()) throw InvalidInput("observations csv: no data rows");

  ObservationSet obs;
  obs.n_nodes = max_node;
  obs.data.assign(max_node, TimingSeries{std::vector<int>(max_slot, 0), slot_duration});
  obs.acks.assign(max_node, TimingSeries{std::vector<int>(max_slot, 0), slot_duration});
  for (const auto& r : rows) {
    obs.data[r.node - 1].counts[r.slot - 1] = r.data;
    obs.acks[r.node - 1].counts[r.slot - 1] = r.ack;
  }
  require_valid(obs);
  return obs;
}

ObservationSet read_observations_csv(const std::string& path, double slot_duration) {
  auto f = open_in(path);
  return read_observations_csv(f, slot_duration);
}

void write_adjacency_csv(std::ostream& out, const Adjacency& a) {
  out << "i,j\n";
  for (auto [i, j] : a.links()) out << (i + 1) << ',' << (j + 1) << '\n';
}

void write_adjacency_csv(const std::string& path, const Adjacency& a) {
  auto f = open_out(path);
  write_adjacency_csv(f, a);
}

Adjacency read_adjacency_csv(std::istream& in, int n_nodes) {
  expect_header(in, "i,j", "adjacency csv");
  Adjacency a(n_nodes);
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split_csv(line);
    if (f.size() != 2)
      throw InvalidInput("adjacency csv: line " + std::to_string(line_no) +
                         ": expected 2 fields");
    const int i = std::stoi(f[0]), j = std::stoi(f[1]);
    if (i < 1 || j < 1 || i > n_nodes || j > n_nodes)
      throw InvalidInput("adjacency csv: line " + std::to_string(line_no) +
                         ": node out of range");
    a.set(i - 1, j - 1, true);
  }
  return a;
}

Adjacency read_adjacency_csv(const std::string& path, int n_nodes) {
  auto f = open_in(path);
  return read_adjacency_csv(f, n_nodes);
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& records) {
  out << "timestamp_s,node,kind\n";
  out << std::setprecision(12);
  for (const auto& r : records)
    out << r.timestamp << ',' << r.node << ',' << (r.is_ack ? "ACK" : "DATA") << '\n';
}

std::vector<TraceRecord> read_trace_csv(std::istream& in) {
  expect_header(in, "timestamp_s,node,kind", "trace csv");
  std::vector<TraceRecord> records;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.back() == '\r') line.pop_back();
    auto f = split_csv(line);
    if (f.size() != 3)
      throw InvalidInput("trace csv: line " + std::to_string(line_no) + ": expected 3 fields");
    TraceRecord r;
    r.timestamp = std::stod(f[0]);
    r.node = std::stoi(f[1]);
    if (f[2] == "DATA")
      r.is_ack = false;
    else if (f[2] == "ACK")
      r.is_ack = true;
    else
      throw InvalidInput("trace csv: line " + std::to_string(line_no) +
                         ": kind must be DATA or ACK");
    records.push_back(r);
  }
  return records;
}

std::vector<TraceRecord> read_trace_csv(const std::string& path) {
  auto f = open_in(path);
  return read_trace_csv(f);
}

void write_latent_csv(std::ostream& out, const LatentSample& s) {
  out << "i,j,slot,d,e\n";
  for (std::size_t l = 0; l < s.links.size(); ++l) {
    auto [i, j] = s.links[l];
    for (int k = 0; k < s.n_slots; ++k)
      if (s.d[l][k])
        out << (i + 1) << ',' << (j + 1) << ',' << (k + 1) << ',' << int(s.d[l][k]) << ','
            << int(s.e[l][k]) << '\n';
  }
}

void write_latent_csv(const std::string& path, const LatentSample& s) {
  auto f = open_out(path);
  write_latent_csv(f, s);
}

void write_em_trace_csv(std::ostream& out, const std::vector<EmIterate>& trace,
                        const Adjacency* truth) {
  out << "iteration,p_d,p_fa,mean_rate,mean_loss,edit_distance\n";
  for (const auto& row : trace) {
    out << row.iteration << ',';
    if (truth) {
      const auto r = rates(confusion(*truth, row.adjacency));
      out << r.p_d << ',' << r.p_fa << ',';
    } else {
      out << ",,";
    }
    out << row.mean_rate << ',' << row.mean_loss << ',' << row.edit_distance << '\n';
  }
}

void write_em_trace_csv(const std::string& path, const std::vector<EmIterate>& trace,
                        const Adjacency* truth) {
  auto f = open_out(path);
  write_em_trace_csv(f, trace, truth);
}

// wall_ms is deliberately not serialized: result files must be byte-identical
// across reruns of the same config and seed.
void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << "sweep_param,sweep_value,algorithm,trial,iteration,p_d,p_fa\n";
  for (const auto& r : rows)
    out << sweep_param_name(r.sweep_param) << ',' << r.sweep_value << ','
        << algorithm_name(r.algorithm) << ',' << r.trial << ',' << r.iteration << ','
        << r.p_d << ',' << r.p_fa << '\n';
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
  auto f = open_out(path);
  write_results_csv(f, rows);
}

void write_aggregated_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "sweep_param,sweep_value,algorithm,iteration,mean_p_d,std_p_d,mean_p_fa,std_p_fa,n\n";
  for (const auto& r : rows)
    out << sweep_param_name(r.sweep_param) << ',' << r.sweep_value << ','
        << algorithm_name(r.algorithm) << ',' << r.iteration << ',' << r.mean_p_d << ','
        << r.std_p_d << ',' << r.mean_p_fa << ',' << r.std_p_fa << ',' << r.n << '\n';
}

void write_aggregated_csv(const std::string& path, const std::vector<AggregateRow>& rows) {
  auto f = open_out(path);
  write_aggregated_csv(f, rows);
}

}  // namespace topoinfer
