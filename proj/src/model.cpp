#include "netdt/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>

#include "netdt/errors.hpp"
#include "netdt/rng.hpp"

namespace netdt {

using ad::Tape;
using ad::Var;
using ad::Matrix;

std::string_view to_string(CapacityEncoding e) {
  return e == CapacityEncoding::Factorized ? "factorized" : "raw";
}

CapacityEncoding parse_capacity_encoding(std::string_view s) {
  if (s == "factorized") return CapacityEncoding::Factorized;
  if (s == "raw") return CapacityEncoding::Raw;
  throw ConfigError("unknown capacity encoding '" + std::string(s) + "'");
}

nlohmann::json scaling_to_json(const FeatureScaling& s) {
  return {{"capacity_unit", s.capacity_unit},
          {"rate_unit", s.rate_unit},
          {"pkt_unit", s.pkt_unit},
          {"buffer_unit", s.buffer_unit}};
}

FeatureScaling scaling_from_json(const nlohmann::json& j) {
  FeatureScaling s;
  try {
    s.capacity_unit = j.at("capacity_unit").get<double>();
    s.rate_unit = j.at("rate_unit").get<double>();
    s.pkt_unit = j.at("pkt_unit").get<double>();
    s.buffer_unit = j.at("buffer_unit").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed feature scaling: ") + e.what());
  }
  if (!(s.capacity_unit > 0 && s.rate_unit > 0 && s.pkt_unit > 0 && s.buffer_unit > 0)) {
    throw ConfigError("feature scaling units must be > 0");
  }
  return s;
}

std::size_t link_feature_size(CapacityEncoding e) {
  return (e == CapacityEncoding::Factorized ? 2 : 1) + kSchedPolicyCount;
}

FeatureMatrices extract_features(const NetworkSample& sample, const ModelConfig& cfg,
                                 const FeatureScaling& scaling) {
  const auto cols = [](std::size_t n) { return static_cast<Eigen::Index>(n); };
  FeatureMatrices fm;
  fm.links = Matrix::Zero(cols(link_feature_size(cfg.capacity_encoding)), cols(sample.links.size()));
  for (const Link& l : sample.links) {
    auto x = fm.links.col(cols(l.id));
    Eigen::Index k = 0;
    if (cfg.capacity_encoding == CapacityEncoding::Factorized) {
      x[k++] = l.capacity.c_ref / scaling.capacity_unit;
      x[k++] = l.capacity.s_f;
    } else {
      x[k++] = l.capacity.effective() / scaling.capacity_unit;
    }
    x[k + static_cast<Eigen::Index>(l.sched_policy)] = 1.0;
  }
  fm.queues = Matrix::Zero(cols(kQueueFeatureSize), cols(sample.queues.size()));
  for (const Queue& q : sample.queues) {
    auto x = fm.queues.col(cols(q.id));
    x[0] = q.buffer_size / scaling.buffer_unit;
    const int level = std::clamp(q.priority, 0, static_cast<int>(kPriorityLevels) - 1);
    x[1 + level] = 1.0;
    x[1 + static_cast<Eigen::Index>(kPriorityLevels)] = q.weight;
  }
  fm.flows = Matrix::Zero(cols(kFlowFeatureSize), cols(sample.flows.size()));
  for (const Flow& f : sample.flows) {
    auto x = fm.flows.col(cols(f.id));
    x[0] = f.traffic.avg_rate / scaling.rate_unit;
    x[1] = f.traffic.avg_pkt_size / scaling.pkt_unit;
    x[2 + static_cast<Eigen::Index>(f.traffic.model)] = 1.0;
  }
  return fm;
}

namespace {

void check_config(const ModelConfig& c) {
  const std::size_t widest =
      std::max({link_feature_size(c.capacity_encoding), kQueueFeatureSize, kFlowFeatureSize});
  if (c.hidden < widest) {
    throw ConfigError("hidden width " + std::to_string(c.hidden) + " is below the feature width " +
                      std::to_string(widest));
  }
  if (c.t_iters < 1) throw ConfigError("t_iters must be >= 1");
  if (c.l_max < 1) throw ConfigError("l_max must be >= 1");
}

Matrix pad(const Matrix& x, std::size_t n) {
  if (static_cast<std::size_t>(x.rows()) > n) {
    throw ConfigError("feature vector of length " + std::to_string(x.rows()) +
                      " does not fit hidden width " + std::to_string(n));
  }
  Matrix h = Matrix::Zero(static_cast<Eigen::Index>(n), x.cols());
  h.topRows(x.rows()) = x;
  return h;
}

std::uint32_t col(std::size_t i) { return static_cast<std::uint32_t>(i); }

void check_finite(const Tape& tape, std::initializer_list<Var> vars, const char* stage,
                  std::size_t iteration) {
  for (Var v : vars) {
    if (!tape.value(v).allFinite()) {
      throw NumericError(std::string("non-finite value in ") + stage + " stage at iteration " +
                         std::to_string(iteration));
    }
  }
}

}  // namespace

ModelParams::ModelParams(const ModelConfig& cfg, const FeatureScaling& sc)
    : config(cfg),
      scaling(sc),
      frnn("frnn", 2 * cfg.hidden, cfg.hidden),
      u_q("u_q", cfg.hidden, cfg.hidden),
      lrnn("lrnn", cfg.hidden, cfg.hidden),
      r_q("r_q", cfg.hidden, cfg.hidden, 1, ad::OutputActivation::Sigmoid),
      r_f("r_f", cfg.hidden, cfg.hidden, 1, ad::OutputActivation::Identity) {
  check_config(cfg);
}

ModelParams::ModelParams(const ModelConfig& cfg, const FeatureScaling& sc, std::uint64_t seed)
    : ModelParams(cfg, sc) {
  Rng rng(mix_seed(seed, 0x1417));
  const auto ps = parameters();
  ad::glorot_init(ps, rng);
}

std::vector<ad::Parameter*> ModelParams::parameters() {
  std::vector<ad::Parameter*> out;
  for (auto* group : {&frnn, &u_q, &lrnn}) {
    for (auto* p : group->parameters()) out.push_back(p);
  }
  for (auto* group : {&r_q, &r_f}) {
    for (auto* p : group->parameters()) out.push_back(p);
  }
  return out;
}

std::vector<const ad::Parameter*> ModelParams::parameters() const {
  std::vector<const ad::Parameter*> out;
  for (const auto* group : {&frnn, &u_q, &lrnn}) {
    for (const auto* p : group->parameters()) out.push_back(p);
  }
  for (const auto* group : {&r_q, &r_f}) {
    for (const auto* p : group->parameters()) out.push_back(p);
  }
  return out;
}

HiddenStates init_states(Tape& tape, const NetworkSample& sample, const ModelParams& params) {
  const FeatureMatrices fm = extract_features(sample, params.config, params.scaling);
  const std::size_t n = params.config.hidden;
  return {tape.constant(pad(fm.flows, n)), tape.constant(pad(fm.queues, n)),
          tape.constant(pad(fm.links, n))};
}

ScanSchedule make_schedule(std::span<const std::size_t> lengths) {
  ScanSchedule s;
  s.order.resize(lengths.size());
  for (std::size_t i = 0; i < lengths.size(); ++i) s.order[i] = i;
  std::stable_sort(s.order.begin(), s.order.end(),
                   [&](std::size_t a, std::size_t b) { return lengths[a] > lengths[b]; });
  s.position.resize(lengths.size());
  for (std::size_t p = 0; p < s.order.size(); ++p) s.position[s.order[p]] = p;
  const std::size_t longest = lengths.empty() ? 0 : lengths[s.order.front()];
  s.active.assign(longest, 0);
  for (std::size_t len : lengths) {
    for (std::size_t k = 0; k < len; ++k) ++s.active[k];
  }
  return s;
}

ad::ColumnTerm FlowStageOutput::message(std::size_t f, std::size_t hop,
                                        std::uint32_t dst_col) const {
  return {steps.at(hop), col(schedule.position.at(f)), dst_col, 1.0};
}

namespace {

// Batch of `count` columns taken as a prefix of `src`, or src itself.
Var prefix(Tape& tape, Var src, std::size_t count) {
  const Matrix& v = tape.value(src);
  if (static_cast<std::size_t>(v.cols()) == count) return src;
  std::vector<ad::ColumnTerm> terms(count);
  for (std::size_t p = 0; p < count; ++p) terms[p] = {src, col(p), col(p), 1.0};
  return tape.combine_columns(v.rows(), static_cast<Eigen::Index>(count), terms);
}

Var gather(Tape& tape, Var src, std::span<const std::size_t> cols) {
  std::vector<ad::ColumnTerm> terms(cols.size());
  for (std::size_t p = 0; p < cols.size(); ++p) terms[p] = {src, col(cols[p]), col(p), 1.0};
  return tape.combine_columns(tape.value(src).rows(), static_cast<Eigen::Index>(cols.size()),
                              terms);
}

}  // namespace

FlowStageOutput flow_stage(Tape& tape, const HiddenStates& states, const NetworkSample& sample,
                           const ModelParams& params) {
  FlowStageOutput out;
  std::vector<std::size_t> lengths;
  lengths.reserve(sample.flows.size());
  for (const Flow& f : sample.flows) {
    if (f.path.empty()) throw ShapeError("flow " + std::to_string(f.id) + " has an empty path");
    lengths.push_back(f.path.size());
  }
  out.schedule = make_schedule(lengths);
  const ScanSchedule& sched = out.schedule;
  const std::size_t l_max = params.config.l_max;
  const std::size_t hops = sched.active.size();
  out.steps.reserve(hops);

  Var h = gather(tape, states.flows, sched.order);
  std::vector<std::size_t> q_cols, l_cols;
  // Each chunk of at most l_max hops starts from the previous chunk's final
  // state; flows that end inside a chunk leave the batch prefix there.
  for (std::size_t start = 0; start < hops; start += l_max) {
    const std::size_t end = std::min(hops, start + l_max);
    Var chunk_state = h;
    for (std::size_t k = start; k < end; ++k) {
      const std::size_t n = sched.active[k];
      q_cols.resize(n);
      l_cols.resize(n);
      for (std::size_t p = 0; p < n; ++p) {
        const Hop& hop = sample.flows[sched.order[p]].path[k];
        q_cols[p] = hop.queue_id;
        l_cols[p] = hop.link_id;
      }
      const Var input =
          tape.concat(gather(tape, states.queues, q_cols), gather(tape, states.links, l_cols));
      chunk_state = ad::gru_step(tape, params.frnn, prefix(tape, chunk_state, n), input);
      out.steps.push_back(chunk_state);
    }
    h = chunk_state;
  }

  std::vector<ad::ColumnTerm> finals(sample.flows.size());
  for (std::size_t f = 0; f < sample.flows.size(); ++f) finals[f] = out.message(f, lengths[f] - 1, col(f));
  out.flows = tape.combine_columns(static_cast<Eigen::Index>(params.config.hidden),
                                   static_cast<Eigen::Index>(sample.flows.size()), finals);
  return out;
}

Var queue_stage(Tape& tape, const HiddenStates& states, const FlowStageOutput& flow_out,
                const SampleIndex& index, const ModelParams& params) {
  std::vector<ad::ColumnTerm> terms;
  for (std::size_t q = 0; q < index.flows_of_queue.size(); ++q) {
    for (const auto& [f, hop] : index.flows_of_queue[q]) terms.push_back(flow_out.message(f, hop, col(q)));
  }
  const Var aggregate =
      tape.combine_columns(static_cast<Eigen::Index>(params.config.hidden),
                           static_cast<Eigen::Index>(index.flows_of_queue.size()), terms);
  return ad::gru_step(tape, params.u_q, states.queues, aggregate);
}

Var link_stage(Tape& tape, Var link_states, Var queue_states, const SampleIndex& index,
               const ModelParams& params) {
  std::vector<std::size_t> lengths;
  lengths.reserve(index.queues_of_link.size());
  for (const auto& qs : index.queues_of_link) lengths.push_back(qs.size());
  const ScanSchedule sched = make_schedule(lengths);

  Var h = gather(tape, link_states, sched.order);
  std::vector<Var> steps;
  std::vector<std::size_t> q_cols;
  for (std::size_t k = 0; k < sched.active.size(); ++k) {
    const std::size_t n = sched.active[k];
    q_cols.resize(n);
    for (std::size_t p = 0; p < n; ++p) q_cols[p] = index.queues_of_link[sched.order[p]][k];
    h = ad::gru_step(tape, params.lrnn, prefix(tape, h, n), gather(tape, queue_states, q_cols));
    steps.push_back(h);
  }
  // Links without queues keep their previous state.
  std::vector<ad::ColumnTerm> finals(lengths.size());
  for (std::size_t l = 0; l < lengths.size(); ++l) {
    finals[l] = lengths[l] == 0 ? ad::ColumnTerm{link_states, col(l), col(l), 1.0}
                                : ad::ColumnTerm{steps[lengths[l] - 1], col(sched.position[l]),
                                                 col(l), 1.0};
  }
  return tape.combine_columns(static_cast<Eigen::Index>(params.config.hidden),
                              static_cast<Eigen::Index>(lengths.size()), finals);
}

ForwardOutput forward(Tape& tape, const NetworkSample& sample, const ModelParams& params,
                      bool keep_graph) {
  const SampleIndex index = build_index(sample);
  const auto begin = static_cast<std::uint32_t>(tape.size());
  HiddenStates states = init_states(tape, sample, params);
  check_finite(tape, {states.flows, states.queues, states.links}, "initialization", 0);
  for (std::size_t t = 0; t < params.config.t_iters; ++t) {
    const auto iteration_start = static_cast<std::uint32_t>(tape.size());
    FlowStageOutput flow_out = flow_stage(tape, states, sample, params);
    check_finite(tape, {flow_out.flows}, "flow", t);
    const Var queues = queue_stage(tape, states, flow_out, index, params);
    check_finite(tape, {queues}, "queue", t);
    const Var links = link_stage(tape, states.links, queues, index, params);
    check_finite(tape, {links}, "link", t);
    const HiddenStates next{flow_out.flows, queues, links};
    if (!keep_graph) {
      const Var keep[] = {next.flows, next.queues, next.links};
      tape.release(t == 0 ? begin : iteration_start, static_cast<std::uint32_t>(tape.size()),
                   keep);
      // The previous states sit just before this iteration's nodes.
      const Var old[] = {states.flows, states.queues, states.links};
      for (Var v : old) tape.release(v.id, v.id + 1, {});
    }
    states = next;
  }
  ForwardOutput out;
  out.occupancy = ad::mlp_forward(tape, params.r_q, states.queues);
  out.flow_head = ad::mlp_forward(tape, params.r_f, states.flows);
  check_finite(tape, {out.occupancy, out.flow_head}, "readout", params.config.t_iters);
  out.states = states;
  return out;
}

Var reconstruct_delay(Tape& tape, const NetworkSample& sample, Var occupancy) {
  const Matrix& occ = tape.value(occupancy);
  if (occ.rows() != 1 || occ.cols() != static_cast<Eigen::Index>(sample.queues.size())) {
    throw ShapeError("reconstruct_delay: one occupancy per queue required");
  }
  std::vector<ad::ColumnTerm> terms;
  Matrix transmission = Matrix::Zero(1, static_cast<Eigen::Index>(sample.flows.size()));
  for (const Flow& f : sample.flows) {
    for (const Hop& h : f.path) {
      const double cap = sample.links[h.link_id].capacity.effective();
      terms.push_back({occupancy, col(h.queue_id), col(f.id),
                       sample.queues[h.queue_id].buffer_size / cap});
      transmission(0, static_cast<Eigen::Index>(f.id)) += f.traffic.avg_pkt_size / cap;
    }
  }
  const Var waiting =
      tape.combine_columns(1, static_cast<Eigen::Index>(sample.flows.size()), terms);
  return tape.add(waiting, tape.constant(std::move(transmission)));
}

std::vector<double> reconstruct_delay(const NetworkSample& sample,
                                      std::span<const double> occupancy) {
  if (occupancy.size() != sample.queues.size()) {
    throw ShapeError("reconstruct_delay: one occupancy per queue required");
  }
  std::vector<double> out;
  out.reserve(sample.flows.size());
  for (const Flow& f : sample.flows) {
    double d = 0.0;
    for (const Hop& h : f.path) {
      const double cap = sample.links[h.link_id].capacity.effective();
      d += (occupancy[h.queue_id] * sample.queues[h.queue_id].buffer_size +
            f.traffic.avg_pkt_size) /
           cap;
    }
    out.push_back(d);
  }
  return out;
}

Prediction predict(const NetworkSample& sample, const ModelParams& params) {
  Tape tape;
  const ForwardOutput fwd = forward(tape, sample, params, false);
  const Matrix& occ = tape.value(fwd.occupancy);
  const Matrix& head = tape.value(fwd.flow_head);
  Prediction p;
  p.occupancy.assign(occ.data(), occ.data() + occ.size());
  p.flow_head.assign(head.data(), head.data() + head.size());
  p.delay = reconstruct_delay(sample, p.occupancy);
  for (std::size_t f = 0; f < p.delay.size(); ++f) {
    if (!std::isfinite(p.delay[f])) {
      throw NumericError("non-finite reconstructed delay for flow " + std::to_string(f));
    }
  }
  return p;
}

nlohmann::json checkpoint_to_json(const ModelParams& params) {
  const auto ps = params.parameters();
  return {{"format_version", kCheckpointFormatVersion},
          {"hyper",
           {{"hidden", params.config.hidden},
            {"t_iters", params.config.t_iters},
            {"l_max", params.config.l_max},
            {"capacity_encoding", to_string(params.config.capacity_encoding)}}},
          {"scaling", scaling_to_json(params.scaling)},
          {"delay_unit", params.delay_unit},
          {"params", ad::parameters_to_json(ps)}};
}

ModelParams checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw ConfigError("unsupported checkpoint format_version");
    }
    const auto& hyper = j.at("hyper");
    ModelConfig cfg;
    cfg.hidden = hyper.at("hidden").get<std::size_t>();
    cfg.t_iters = hyper.at("t_iters").get<std::size_t>();
    cfg.l_max = hyper.at("l_max").get<std::size_t>();
    cfg.capacity_encoding = parse_capacity_encoding(hyper.at("capacity_encoding").get<std::string>());
    ModelParams params(cfg, scaling_from_json(j.at("scaling")));
    params.delay_unit = j.at("delay_unit").get<double>();
    if (!(params.delay_unit > 0.0)) throw ConfigError("checkpoint delay_unit must be > 0");
    const auto ps = params.parameters();
    ad::parameters_from_json(j.at("params"), ps);
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << checkpoint_to_json(params).dump() << '\n';
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace netdt
