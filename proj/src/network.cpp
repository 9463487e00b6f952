#include "netdt/network.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "netdt/errors.hpp"

namespace netdt {

std::string_view to_string(SchedPolicy p) {
  switch (p) {
    case SchedPolicy::Fifo: return "FIFO";
    case SchedPolicy::Sp: return "SP";
    case SchedPolicy::Wfq: return "WFQ";
    case SchedPolicy::Drr: return "DRR";
  }
  return "?";
}

std::string_view to_string(TrafficModel m) {
  return m == TrafficModel::Poisson ? "POISSON" : "ON_OFF";
}

std::string_view to_string(PacketSizeDist d) {
  return d == PacketSizeDist::Exponential ? "EXPONENTIAL" : "FIXED";
}

SchedPolicy parse_sched_policy(std::string_view s) {
  if (s == "FIFO") return SchedPolicy::Fifo;
  if (s == "SP") return SchedPolicy::Sp;
  if (s == "WFQ") return SchedPolicy::Wfq;
  if (s == "DRR") return SchedPolicy::Drr;
  throw ValidationError("unknown scheduling policy '" + std::string(s) + "'");
}

TrafficModel parse_traffic_model(std::string_view s) {
  if (s == "POISSON") return TrafficModel::Poisson;
  if (s == "ON_OFF") return TrafficModel::OnOff;
  throw ValidationError("unknown traffic model '" + std::string(s) + "'");
}

PacketSizeDist parse_pkt_size_dist(std::string_view s) {
  if (s == "EXPONENTIAL") return PacketSizeDist::Exponential;
  if (s == "FIXED") return PacketSizeDist::Fixed;
  throw ValidationError("unknown packet size distribution '" + std::string(s) + "'");
}

std::vector<std::pair<FlowId, std::size_t>> flows_through_queue(const NetworkSample& sample,
                                                                QueueId queue_id) {
  if (queue_id >= sample.queues.size()) {
    throw DomainError("unknown queue id " + std::to_string(queue_id));
  }
  std::vector<std::pair<FlowId, std::size_t>> out;
  for (const Flow& f : sample.flows) {
    for (std::size_t j = 0; j < f.path.size(); ++j) {
      if (f.path[j].queue_id == queue_id) out.emplace_back(f.id, j);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

void sort_by_priority(const NetworkSample& sample, std::vector<QueueId>& ids) {
  std::sort(ids.begin(), ids.end(), [&](QueueId a, QueueId b) {
    const int pa = sample.queues[a].priority;
    const int pb = sample.queues[b].priority;
    return pa != pb ? pa < pb : a < b;
  });
}

}  // namespace

std::vector<QueueId> queues_of_link(const NetworkSample& sample, LinkId link_id) {
  if (link_id >= sample.links.size()) {
    throw DomainError("unknown link id " + std::to_string(link_id));
  }
  std::vector<QueueId> ids = sample.links[link_id].queue_ids;
  for (QueueId q : ids) {
    if (q >= sample.queues.size()) {
      throw DomainError("link " + std::to_string(link_id) + " references unknown queue " +
                        std::to_string(q));
    }
  }
  sort_by_priority(sample, ids);
  return ids;
}

SampleIndex build_index(const NetworkSample& sample) {
  SampleIndex index;
  index.flows_of_queue.resize(sample.queues.size());
  // Flows are visited in id order, so each list comes out sorted.
  for (const Flow& f : sample.flows) {
    for (std::size_t j = 0; j < f.path.size(); ++j) {
      const QueueId q = f.path[j].queue_id;
      if (q >= sample.queues.size()) {
        throw DomainError("flow " + std::to_string(f.id) + " references unknown queue " +
                          std::to_string(q));
      }
      index.flows_of_queue[q].emplace_back(f.id, j);
    }
  }
  index.queues_of_link.reserve(sample.links.size());
  for (LinkId l = 0; l < sample.links.size(); ++l) {
    index.queues_of_link.push_back(queues_of_link(sample, l));
  }
  return index;
}

std::string_view to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::NodeCount: return "node-count";
    case ViolationKind::IdMismatch: return "id-mismatch";
    case ViolationKind::DanglingReference: return "dangling-reference";
    case ViolationKind::SelfLoop: return "self-loop";
    case ViolationKind::NonPositiveCapacity: return "non-positive-capacity";
    case ViolationKind::EmptyQueueList: return "empty-queue-list";
    case ViolationKind::FifoQueueCount: return "fifo-queue-count";
    case ViolationKind::QueueOwnership: return "queue-ownership";
    case ViolationKind::NonPositiveBuffer: return "non-positive-buffer";
    case ViolationKind::NegativeWeight: return "negative-weight";
    case ViolationKind::NonPositiveRate: return "non-positive-rate";
    case ViolationKind::NonPositivePacketSize: return "non-positive-packet-size";
    case ViolationKind::OnOffDurations: return "on-off-durations";
    case ViolationKind::EmptyPath: return "empty-path";
    case ViolationKind::PathEndpoints: return "path-endpoints";
    case ViolationKind::PathContiguity: return "path-contiguity";
    case ViolationKind::HopQueueNotOnLink: return "hop-queue-not-on-link";
    case ViolationKind::LabelCount: return "label-count";
    case ViolationKind::LabelRange: return "label-range";
  }
  return "?";
}

bool ValidationReport::has(ViolationKind kind) const {
  return std::any_of(violations.begin(), violations.end(),
                     [kind](const Violation& v) { return v.kind == kind; });
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (const Violation& v : violations) {
    os << to_string(v.kind) << ": " << v.message << '\n';
  }
  return os.str();
}

namespace {

// Simulated mean delay may undercut the average-packet transmission time
// slightly: delivered packets are a size-biased subset when large packets get
// tail-dropped, and the sample mean of packet sizes fluctuates.
constexpr double kDelayFloorSlack = 0.9;

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

class Checker {
 public:
  explicit Checker(const NetworkSample& s) : s_(s) {}

  ValidationReport run() {
    if (s_.nodes < 1) add(ViolationKind::NodeCount, "sample has no nodes");
    check_links();
    check_queues();
    check_flows();
    check_labels();
    return std::move(report_);
  }

 private:
  template <typename... Parts>
  void add(ViolationKind kind, const Parts&... parts) {
    std::ostringstream os;
    (os << ... << parts);
    report_.violations.push_back({kind, os.str()});
  }

  void check_links() {
    for (std::size_t i = 0; i < s_.links.size(); ++i) {
      const Link& l = s_.links[i];
      if (l.id != i) add(ViolationKind::IdMismatch, "link at index ", i, " has id ", l.id);
      if (l.src_node >= s_.nodes || l.dst_node >= s_.nodes) {
        add(ViolationKind::DanglingReference, "link ", i, " endpoint outside node range");
      }
      if (l.src_node == l.dst_node) add(ViolationKind::SelfLoop, "link ", i, " is a self-loop");
      if (!finite_positive(l.capacity.c_ref) || !finite_positive(l.capacity.s_f)) {
        add(ViolationKind::NonPositiveCapacity, "link ", i, " has c_ref=", l.capacity.c_ref,
            " s_f=", l.capacity.s_f);
      }
      if (l.queue_ids.empty()) add(ViolationKind::EmptyQueueList, "link ", i, " has no queues");
      if (l.sched_policy == SchedPolicy::Fifo && l.queue_ids.size() > 1) {
        add(ViolationKind::FifoQueueCount, "FIFO link ", i, " has ", l.queue_ids.size(),
            " queues");
      }
      for (QueueId q : l.queue_ids) {
        if (q >= s_.queues.size()) {
          add(ViolationKind::DanglingReference, "link ", i, " lists unknown queue ", q);
        } else if (s_.queues[q].link_id != i) {
          add(ViolationKind::QueueOwnership, "link ", i, " lists queue ", q, " owned by link ",
              s_.queues[q].link_id);
        }
      }
    }
  }

  void check_queues() {
    for (std::size_t i = 0; i < s_.queues.size(); ++i) {
      const Queue& q = s_.queues[i];
      if (q.id != i) add(ViolationKind::IdMismatch, "queue at index ", i, " has id ", q.id);
      if (q.link_id >= s_.links.size()) {
        add(ViolationKind::DanglingReference, "queue ", i, " owned by unknown link ", q.link_id);
      } else {
        const auto& ids = s_.links[q.link_id].queue_ids;
        if (std::find(ids.begin(), ids.end(), i) == ids.end()) {
          add(ViolationKind::QueueOwnership, "queue ", i, " not listed by its link ", q.link_id);
        }
      }
      if (!finite_positive(q.buffer_size)) {
        add(ViolationKind::NonPositiveBuffer, "queue ", i, " buffer_size=", q.buffer_size);
      }
      if (!(q.weight >= 0.0) || !std::isfinite(q.weight)) {
        add(ViolationKind::NegativeWeight, "queue ", i, " weight=", q.weight);
      }
    }
  }

  void check_flows() {
    for (std::size_t i = 0; i < s_.flows.size(); ++i) {
      const Flow& f = s_.flows[i];
      if (f.id != i) add(ViolationKind::IdMismatch, "flow at index ", i, " has id ", f.id);
      if (f.src_node >= s_.nodes || f.dst_node >= s_.nodes) {
        add(ViolationKind::DanglingReference, "flow ", i, " endpoint outside node range");
      }
      const TrafficDescriptor& t = f.traffic;
      if (!finite_positive(t.avg_rate)) {
        add(ViolationKind::NonPositiveRate, "flow ", i, " avg_rate=", t.avg_rate);
      }
      if (!finite_positive(t.avg_pkt_size)) {
        add(ViolationKind::NonPositivePacketSize, "flow ", i, " avg_pkt_size=", t.avg_pkt_size);
      }
      if (t.model == TrafficModel::OnOff &&
          (!finite_positive(t.on_mean) || !finite_positive(t.off_mean))) {
        add(ViolationKind::OnOffDurations, "flow ", i, " on/off means must be positive");
      }
      check_path(i, f);
    }
  }

  void check_path(std::size_t i, const Flow& f) {
    if (f.path.empty()) {
      add(ViolationKind::EmptyPath, "flow ", i, " has an empty path");
      return;
    }
    bool resolvable = true;
    for (std::size_t j = 0; j < f.path.size(); ++j) {
      const Hop& h = f.path[j];
      if (h.link_id >= s_.links.size() || h.queue_id >= s_.queues.size()) {
        add(ViolationKind::DanglingReference, "flow ", i, " hop ", j, " references unknown ids");
        resolvable = false;
        continue;
      }
      if (s_.queues[h.queue_id].link_id != h.link_id) {
        add(ViolationKind::HopQueueNotOnLink, "flow ", i, " hop ", j, ": queue ", h.queue_id,
            " does not belong to link ", h.link_id);
      }
    }
    if (!resolvable) return;
    if (s_.links[f.path.front().link_id].src_node != f.src_node ||
        s_.links[f.path.back().link_id].dst_node != f.dst_node) {
      add(ViolationKind::PathEndpoints, "flow ", i, " path does not join its endpoints");
    }
    for (std::size_t j = 1; j < f.path.size(); ++j) {
      const Link& prev = s_.links[f.path[j - 1].link_id];
      const Link& cur = s_.links[f.path[j].link_id];
      if (cur.src_node != prev.dst_node) {
        add(ViolationKind::PathContiguity, "flow ", i, " hop ", j, " starts at node ", cur.src_node,
            " but hop ", j - 1, " ends at node ", prev.dst_node);
      }
    }
  }

  void check_labels() {
    if (!s_.labels) return;
    const PerformanceLabels& lab = *s_.labels;
    if (lab.flows.size() != s_.flows.size() || lab.queue_occupancy.size() != s_.queues.size()) {
      add(ViolationKind::LabelCount, "labels cover ", lab.flows.size(), " flows and ",
          lab.queue_occupancy.size(), " queues; sample has ", s_.flows.size(), " and ",
          s_.queues.size());
      return;
    }
    for (std::size_t i = 0; i < lab.flows.size(); ++i) {
      const FlowLabels& fl = lab.flows[i];
      if (!(fl.loss_ratio >= 0.0 && fl.loss_ratio <= 1.0)) {
        add(ViolationKind::LabelRange, "flow ", i, " loss_ratio=", fl.loss_ratio);
      }
      if (!(fl.jitter >= 0.0) || !std::isfinite(fl.jitter)) {
        add(ViolationKind::LabelRange, "flow ", i, " jitter=", fl.jitter);
      }
      if (!std::isfinite(fl.mean_delay)) {
        add(ViolationKind::LabelRange, "flow ", i, " mean_delay=", fl.mean_delay);
        continue;
      }
      bool path_ok = !s_.flows[i].path.empty();
      for (const Hop& h : s_.flows[i].path) {
        path_ok = path_ok && h.link_id < s_.links.size() &&
                  finite_positive(s_.links[h.link_id].capacity.effective());
      }
      if (path_ok) {
        const double floor = path_transmission_time(s_, s_.flows[i]);
        if (fl.mean_delay < kDelayFloorSlack * floor) {
          add(ViolationKind::LabelRange, "flow ", i, " mean_delay=", fl.mean_delay,
              " below transmission time ", floor);
        }
      }
    }
    for (std::size_t q = 0; q < lab.queue_occupancy.size(); ++q) {
      const double o = lab.queue_occupancy[q];
      if (!(o >= 0.0 && o <= 1.0)) add(ViolationKind::LabelRange, "queue ", q, " occupancy=", o);
    }
  }

  const NetworkSample& s_;
  ValidationReport report_;
};

}  // namespace

ValidationReport validate_sample(const NetworkSample& sample) { return Checker(sample).run(); }

double path_transmission_time(const NetworkSample& sample, const Flow& flow) {
  double t = 0.0;
  for (const Hop& h : flow.path) {
    t += flow.traffic.avg_pkt_size / sample.links.at(h.link_id).capacity.effective();
  }
  return t;
}

}  // namespace netdt
