#include "netdt/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>

#include "netdt/errors.hpp"
#include "netdt/rng.hpp"

namespace netdt {

namespace {

enum class EventType : std::uint8_t { Arrival, Departure, Toggle };

struct Event {
  double time;
  std::uint64_t seq;
  EventType type;
  std::uint32_t id;     // flow for Arrival/Toggle, link for Departure
  std::uint32_t epoch;  // ON/OFF epoch an Arrival was scheduled in
};

struct EventAfter {
  bool operator()(const Event& a, const Event& b) const {
    return a.time != b.time ? a.time > b.time : a.seq > b.seq;
  }
};

struct Packet {
  double created;
  double size;
  double tx_time_sum;
  std::uint32_t flow;
  std::uint32_t hop;
  bool measured;
};

struct LinkState {
  double capacity = 0.0;
  double buffer = 0.0;
  std::deque<Packet> waiting;
  double waiting_bits = 0.0;
  bool busy = false;
  Packet in_service{};
  double service_end = 0.0;
  double t_last = 0.0;
  double integral = 0.0;
};

struct FlowState {
  StreamRng arrivals{0};
  StreamRng toggles{0};
  double pkt_rate = 0.0;  // packets/second while emitting
  bool on = true;
  std::uint32_t epoch = 0;
};

class Simulator {
 public:
  Simulator(const NetworkSample& s, const SimConfig& cfg)
      : s_(s), cfg_(cfg), window_lo_(cfg.warmup), window_hi_(cfg.warmup + cfg.measure) {
    links_.resize(s.links.size());
    for (std::size_t l = 0; l < s.links.size(); ++l) {
      links_[l].capacity = s.links[l].capacity.effective();
      links_[l].buffer = s.queues[s.links[l].queue_ids.front()].buffer_size;
    }
    flows_.resize(s.flows.size());
    stats_.flows.resize(s.flows.size());
    stats_.occupancy_integral.assign(s.queues.size(), 0.0);
    stats_.min_queueing_slack = std::numeric_limits<double>::infinity();
  }

  SimResult run() {
    for (std::size_t f = 0; f < s_.flows.size(); ++f) start_flow(f);
    while (!events_.empty()) {
      const Event ev = events_.top();
      if (ev.time >= window_hi_) break;
      events_.pop();
      ++stats_.events;
      switch (ev.type) {
        case EventType::Arrival: on_arrival(ev); break;
        case EventType::Departure: on_departure(ev); break;
        case EventType::Toggle: on_toggle(ev); break;
      }
    }
    for (std::size_t l = 0; l < links_.size(); ++l) accumulate(l, window_hi_);
    count_in_flight();
    return finish();
  }

 private:
  void push(double t, EventType type, std::size_t id, std::uint32_t epoch = 0) {
    events_.push({t, seq_++, type, static_cast<std::uint32_t>(id), epoch});
  }

  void start_flow(std::size_t f) {
    const TrafficDescriptor& t = s_.flows[f].traffic;
    FlowState& st = flows_[f];
    st.arrivals = StreamRng(mix_seed(cfg_.seed, 2 * f));
    st.toggles = StreamRng(mix_seed(cfg_.seed, 2 * f + 1));
    st.pkt_rate = t.avg_rate / t.avg_pkt_size;
    if (t.model == TrafficModel::OnOff) {
      const double cycle = t.on_mean + t.off_mean;
      st.pkt_rate *= cycle / t.on_mean;
      st.on = st.toggles.uniform() < t.on_mean / cycle;
      const double mean = st.on ? t.on_mean : t.off_mean;
      push(mean * st.toggles.exponential(), EventType::Toggle, f);
    }
    if (st.on && st.pkt_rate > 0.0) schedule_arrival(f, 0.0);
  }

  void schedule_arrival(std::size_t f, double now) {
    FlowState& st = flows_[f];
    push(now + st.arrivals.exponential() / st.pkt_rate, EventType::Arrival, f, st.epoch);
  }

  void on_toggle(const Event& ev) {
    const std::size_t f = ev.id;
    FlowState& st = flows_[f];
    const TrafficDescriptor& t = s_.flows[f].traffic;
    st.on = !st.on;
    ++st.epoch;  // invalidates the pending arrival when switching off
    if (st.on) schedule_arrival(f, ev.time);
    push(ev.time + (st.on ? t.on_mean : t.off_mean) * st.toggles.exponential(), EventType::Toggle,
         f);
  }

  void on_arrival(const Event& ev) {
    const std::size_t f = ev.id;
    FlowState& st = flows_[f];
    if (ev.epoch != st.epoch) return;
    const TrafficDescriptor& t = s_.flows[f].traffic;
    Packet p{};
    p.created = ev.time;
    p.size = t.pkt_size_dist == PacketSizeDist::Fixed ? t.avg_pkt_size
                                                      : t.avg_pkt_size * st.arrivals.exponential();
    p.flow = static_cast<std::uint32_t>(f);
    p.hop = 0;
    p.measured = ev.time >= window_lo_;
    if (p.measured) ++stats_.flows[f].sent;
    enqueue(p, ev.time);
    schedule_arrival(f, ev.time);
  }

  // Unfinished work (bits) in the link's system at time t.
  double work(const LinkState& ls, double t) const {
    return ls.waiting_bits + (ls.busy ? ls.capacity * std::max(0.0, ls.service_end - t) : 0.0);
  }

  std::size_t count(const LinkState& ls) const { return ls.waiting.size() + (ls.busy ? 1 : 0); }

  // Integrate the occupancy measure from t_last to t, clipped to the window.
  void accumulate(std::size_t l, double t) {
    LinkState& ls = links_[l];
    const double a = std::max(ls.t_last, window_lo_);
    const double b = std::min(t, window_hi_);
    if (b > a) {
      if (cfg_.packet_limit > 0) {
        ls.integral += static_cast<double>(count(ls)) * (b - a);
      } else if (ls.busy || ls.waiting_bits > 0.0) {
        ls.integral += 0.5 * (work(ls, a) + work(ls, b)) * (b - a);
      }
    }
    ls.t_last = t;
  }

  bool admits(const LinkState& ls, const Packet& p, double t) const {
    if (cfg_.packet_limit > 0) return count(ls) < cfg_.packet_limit;
    return work(ls, t) + p.size <= ls.buffer;
  }

  void enqueue(Packet p, double t) {
    const std::size_t l = s_.flows[p.flow].path[p.hop].link_id;
    LinkState& ls = links_[l];
    accumulate(l, t);
    if (!admits(ls, p, t)) {
      if (p.measured) ++stats_.flows[p.flow].dropped;
      return;
    }
    if (!ls.busy) {
      begin_service(l, p, t);
    } else {
      ls.waiting_bits += p.size;
      ls.waiting.push_back(p);
    }
  }

  void begin_service(std::size_t l, Packet p, double t) {
    LinkState& ls = links_[l];
    const double tx = p.size / ls.capacity;
    p.tx_time_sum += tx;
    ls.busy = true;
    ls.in_service = p;
    ls.service_end = t + tx;
    push(ls.service_end, EventType::Departure, l);
  }

  void on_departure(const Event& ev) {
    const std::size_t l = ev.id;
    LinkState& ls = links_[l];
    accumulate(l, ev.time);
    Packet done = ls.in_service;
    ls.busy = false;
    if (!ls.waiting.empty()) {
      Packet next = ls.waiting.front();
      ls.waiting.pop_front();
      ls.waiting_bits -= next.size;
      if (ls.waiting.empty()) ls.waiting_bits = 0.0;  // drop rounding residue
      begin_service(l, next, ev.time);
    }
    const Flow& flow = s_.flows[done.flow];
    if (done.hop + 1 < flow.path.size()) {
      ++done.hop;
      enqueue(done, ev.time);
      return;
    }
    if (!done.measured) return;
    const double delay = ev.time - done.created;
    FlowCounters& fc = stats_.flows[done.flow];
    ++fc.delivered;
    fc.delay_sum += delay;
    fc.delay_sq_sum += delay * delay;
    stats_.min_queueing_slack = std::min(stats_.min_queueing_slack, delay - done.tx_time_sum);
  }

  void count_in_flight() {
    for (FlowCounters& fc : stats_.flows) fc.in_flight = fc.sent - fc.delivered - fc.dropped;
  }

  SimResult finish() {
    SimResult r;
    const double span = window_hi_ - window_lo_;
    r.labels.queue_occupancy.assign(s_.queues.size(), 0.0);
    for (std::size_t l = 0; l < links_.size(); ++l) {
      const QueueId q = s_.links[l].queue_ids.front();
      stats_.occupancy_integral[q] = links_[l].integral;
      const double denom = cfg_.packet_limit > 0 ? static_cast<double>(cfg_.packet_limit)
                                                 : links_[l].buffer;
      r.labels.queue_occupancy[q] = std::clamp(links_[l].integral / (span * denom), 0.0, 1.0);
    }
    r.labels.flows.resize(s_.flows.size());
    for (std::size_t f = 0; f < s_.flows.size(); ++f) {
      const FlowCounters& fc = stats_.flows[f];
      FlowLabels& fl = r.labels.flows[f];
      if (fc.delivered == 0) {
        fl.mean_delay = path_transmission_time(s_, s_.flows[f]);
        fl.jitter = 0.0;
      } else {
        const double n = static_cast<double>(fc.delivered);
        fl.mean_delay = fc.delay_sum / n;
        fl.jitter = std::max(0.0, fc.delay_sq_sum / n - fl.mean_delay * fl.mean_delay);
      }
      fl.loss_ratio = fc.sent == 0 ? 0.0
                                   : static_cast<double>(fc.dropped) / static_cast<double>(fc.sent);
    }
    if (!std::isfinite(stats_.min_queueing_slack)) stats_.min_queueing_slack = 0.0;
    r.stats = std::move(stats_);
    return r;
  }

  const NetworkSample& s_;
  const SimConfig& cfg_;
  const double window_lo_;
  const double window_hi_;
  std::vector<LinkState> links_;
  std::vector<FlowState> flows_;
  std::priority_queue<Event, std::vector<Event>, EventAfter> events_;
  std::uint64_t seq_ = 0;
  SimStats stats_;
};

}  // namespace

SimResult simulate_detailed(const NetworkSample& sample, const SimConfig& cfg) {
  if (!(cfg.warmup >= 0.0) || !(cfg.measure > 0.0)) {
    throw ConfigError("simulation needs warmup >= 0 and measure > 0");
  }
  const ValidationReport report = validate_sample(sample);
  if (!report.ok()) throw ValidationError("invalid sample:\n" + report.summary());
  for (const Link& l : sample.links) {
    if (l.sched_policy != SchedPolicy::Fifo) {
      throw UnsupportedPolicyError("link " + std::to_string(l.id) + " uses " +
                                   std::string(to_string(l.sched_policy)) +
                                   "; only FIFO is simulated");
    }
  }
  return Simulator(sample, cfg).run();
}

PerformanceLabels simulate(const NetworkSample& sample, const SimConfig& cfg) {
  return simulate_detailed(sample, cfg).labels;
}

double max_flow_loss(const PerformanceLabels& labels) {
  double m = 0.0;
  for (const FlowLabels& f : labels.flows) m = std::max(m, f.loss_ratio);
  return m;
}

NetworkSample scale_rates(NetworkSample sample, double factor) {
  for (Flow& f : sample.flows) f.traffic.avg_rate *= factor;
  sample.labels.reset();
  return sample;
}

CalibrationResult calibrate_intensity(const NetworkSample& sample, double target_loss,
                                      const SimConfig& cfg, double tolerance) {
  if (!(target_loss > 0.0 && target_loss <= 0.1)) {
    throw ConfigError("target loss must lie in (0, 0.1]");
  }
  if (!(tolerance > 0.0)) throw ConfigError("calibration tolerance must be > 0");
  double lo = std::log(kCalibrationFactorMin);
  double hi = std::log(kCalibrationFactorMax);
  CalibrationResult best;
  for (int step = 1; step <= kCalibrationMaxSteps; ++step) {
    const double factor = std::exp(0.5 * (lo + hi));
    NetworkSample scaled = scale_rates(sample, factor);
    SimConfig probe = cfg;
    probe.warmup /= factor;
    probe.measure /= factor;
    const double loss = max_flow_loss(simulate(scaled, probe));
    if (std::abs(loss - target_loss) <= tolerance) {
      return {std::move(scaled), factor, loss, step};
    }
    if (loss < target_loss) {
      lo = std::log(factor);
    } else {
      hi = std::log(factor);
    }
    best.factor = factor;
    best.max_loss = loss;
  }
  throw CalibrationError("could not reach max loss " + std::to_string(target_loss) +
                         " within factor bounds [0.01, 100]; last factor " +
                         std::to_string(best.factor) + " gave " + std::to_string(best.max_loss));
}

}  // namespace netdt
