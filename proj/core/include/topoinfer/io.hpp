#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "topoinfer/emcda.hpp"
#include "topoinfer/eval.hpp"
#include "topoinfer/sim.hpp"
#include "topoinfer/types.hpp"

namespace topoinfer {

// Observation CSV: header `slot,node,data_count,ack_count`, slots and nodes
// 1-based, one row per (slot, node).
void write_observations_csv(std::ostream& out, const ObservationSet& obs);
void write_observations_csv(const std::string& path, const ObservationSet& obs);
ObservationSet read_observations_csv(std::istream& in, double slot_duration);
ObservationSet read_observations_csv(const std::string& path, double slot_duration);

// Adjacency CSV: header `i,j`, one 1-based row per active link.
void write_adjacency_csv(std::ostream& out, const Adjacency& a);
void write_adjacency_csv(const std::string& path, const Adjacency& a);
Adjacency read_adjacency_csv(std::istream& in, int n_nodes);
Adjacency read_adjacency_csv(const std::string& path, int n_nodes);

// Trace CSV: header `timestamp_s,node,kind`, kind in {DATA, ACK}.
void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& records);
std::vector<TraceRecord> read_trace_csv(std::istream& in);
std::vector<TraceRecord> read_trace_csv(const std::string& path);

// Latent tensor CSV: header `i,j,slot,d,e`, rows only where d = 1.
void write_latent_csv(std::ostream& out, const LatentSample& s);
void write_latent_csv(const std::string& path, const LatentSample& s);

// EM trace CSV: `iteration,p_d,p_fa,mean_rate,mean_loss,edit_distance`;
// p_d/p_fa are blank when no ground truth is supplied.
void write_em_trace_csv(std::ostream& out, const std::vector<EmIterate>& trace,
                        const Adjacency* truth);
void write_em_trace_csv(const std::string& path, const std::vector<EmIterate>& trace,
                        const Adjacency* truth);

// Experiment results: raw rows and mean/std aggregates.
void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows);
void write_aggregated_csv(std::ostream& out, const std::vector<AggregateRow>& rows);
void write_aggregated_csv(const std::string& path, const std::vector<AggregateRow>& rows);

}  // namespace topoinfer
