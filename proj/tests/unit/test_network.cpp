#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "netdt/errors.hpp"
#include "netdt/network.hpp"
#include "netdt/sample_io.hpp"
#include "support/fixtures.hpp"

using namespace netdt;
using netdt::testing::chain;
using netdt::testing::random_sample;

namespace {

// 4-node star: leaves 1..3 send to each other through hub 0.
NetworkSample star() {
  NetworkSample s;
  s.nodes = 4;
  LinkId id = 0;
  for (NodeId leaf = 1; leaf <= 3; ++leaf) {
    s.links.push_back({id, leaf, 0, {10e6, 1.0}, SchedPolicy::Fifo, {id}});
    s.queues.push_back({id, id, 32000.0, 0, 0.0});
    ++id;
    s.links.push_back({id, 0, leaf, {10e6, 1.0}, SchedPolicy::Fifo, {id}});
    s.queues.push_back({id, id, 32000.0, 0, 0.0});
    ++id;
  }
  // Flows 1->3, 2->3, 3->1; links into leaf 3 are id 5.
  auto up = [](NodeId leaf) { return 2 * (leaf - 1); };
  auto down = [](NodeId leaf) { return 2 * (leaf - 1) + 1; };
  const std::pair<NodeId, NodeId> pairs[] = {{1, 3}, {2, 3}, {3, 1}};
  for (const auto& [a, b] : pairs) {
    Flow f;
    f.id = s.flows.size();
    f.src_node = a;
    f.dst_node = b;
    f.path = {{up(a), up(a)}, {down(b), down(b)}};
    f.traffic.avg_rate = 1e6;
    f.traffic.avg_pkt_size = 1000.0;
    s.flows.push_back(f);
  }
  return s;
}

std::vector<std::pair<FlowId, std::size_t>> brute_flows_through(const NetworkSample& s, QueueId q) {
  std::vector<std::pair<FlowId, std::size_t>> out;
  for (const Flow& f : s.flows) {
    for (std::size_t j = 0; j < f.path.size(); ++j) {
      if (f.path[j].queue_id == q) out.emplace_back(f.id, j);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST_CASE("flows_through_queue on small networks") {
  const NetworkSample one = chain(1);
  CHECK(flows_through_queue(one, 0) == std::vector<std::pair<FlowId, std::size_t>>{{0, 0}});

  NetworkSample idle = chain(2);
  idle.flows[0].path.pop_back();
  idle.flows[0].dst_node = 1;
  CHECK(flows_through_queue(idle, 1).empty());

  const NetworkSample s = star();
  REQUIRE(validate_sample(s).ok());
  const auto shared = flows_through_queue(s, 5);
  CHECK(shared.size() == 2);
  CHECK(shared == brute_flows_through(s, 5));
  for (QueueId q = 0; q < s.queues.size(); ++q) CHECK(flows_through_queue(s, q) == brute_flows_through(s, q));
  CHECK_THROWS_AS(flows_through_queue(s, 99), DomainError);
}

TEST_CASE("queues_of_link orders by priority then id") {
  NetworkSample s = chain(1);
  CHECK(queues_of_link(s, 0) == std::vector<QueueId>{0});
  s.links[0].sched_policy = SchedPolicy::Sp;
  s.queues[0].priority = 2;
  s.queues.push_back({1, 0, 8000.0, 0, 0.0});
  s.queues.push_back({2, 0, 8000.0, 1, 0.0});
  s.links[0].queue_ids = {0, 1, 2};
  CHECK(queues_of_link(s, 0) == std::vector<QueueId>{1, 2, 0});
  CHECK_THROWS_AS(queues_of_link(s, 3), DomainError);
}

TEST_CASE("index functions agree with brute-force scans on random samples") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const NetworkSample s = random_sample(seed, 6 + seed % 5, 1.5, true);
    REQUIRE(validate_sample(s).ok());
    const SampleIndex idx = build_index(s);
    for (QueueId q = 0; q < s.queues.size(); ++q) {
      const auto expect = brute_flows_through(s, q);
      CHECK(flows_through_queue(s, q) == expect);
      CHECK(idx.flows_of_queue[q] == expect);
    }
    for (LinkId l = 0; l < s.links.size(); ++l) {
      std::vector<std::pair<int, QueueId>> owned;
      for (const Queue& q : s.queues) {
        if (q.link_id == l) owned.emplace_back(q.priority, q.id);
      }
      std::sort(owned.begin(), owned.end());
      std::vector<QueueId> expect;
      for (const auto& [p, q] : owned) expect.push_back(q);
      CHECK(queues_of_link(s, l) == expect);
      CHECK(idx.queues_of_link[l] == expect);
    }
    for (const Flow& f : s.flows) {
      for (const Hop& h : f.path) CHECK(s.queues[h.queue_id].link_id == h.link_id);
    }
  }
}

TEST_CASE("validate_sample flags constructed violations") {
  CHECK(validate_sample(chain(1)).ok());

  NetworkSample broken = chain(2);
  broken.links[1].src_node = 0;
  broken.links[1].dst_node = 1;
  broken.flows[0].dst_node = 1;
  CHECK(validate_sample(broken).has(ViolationKind::PathContiguity));

  NetworkSample empty_buffer = chain(1);
  empty_buffer.queues[0].buffer_size = 0.0;
  CHECK(validate_sample(empty_buffer).has(ViolationKind::NonPositiveBuffer));
}

TEST_CASE("validate_sample detects every mutation class") {
  using Mutation = std::pair<ViolationKind, std::function<void(NetworkSample&, Rng&)>>;
  const std::vector<Mutation> mutations = {
      {ViolationKind::NodeCount, [](NetworkSample& s, Rng&) { s.nodes = 0; }},
      {ViolationKind::IdMismatch, [](NetworkSample& s, Rng& r) { s.flows[r.below(s.flows.size())].id += 100; }},
      {ViolationKind::DanglingReference,
       [](NetworkSample& s, Rng& r) { s.flows[r.below(s.flows.size())].path[0].queue_id = s.queues.size() + 3; }},
      {ViolationKind::SelfLoop,
       [](NetworkSample& s, Rng& r) {
         Link& l = s.links[r.below(s.links.size())];
         l.dst_node = l.src_node;
       }},
      {ViolationKind::NonPositiveCapacity,
       [](NetworkSample& s, Rng& r) { s.links[r.below(s.links.size())].capacity.s_f = 0.0; }},
      {ViolationKind::NonPositiveCapacity,
       [](NetworkSample& s, Rng& r) { s.links[r.below(s.links.size())].capacity.c_ref = -1.0; }},
      {ViolationKind::EmptyQueueList,
       [](NetworkSample& s, Rng& r) { s.links[r.below(s.links.size())].queue_ids.clear(); }},
      {ViolationKind::FifoQueueCount,
       [](NetworkSample& s, Rng& r) {
         Link& l = s.links[r.below(s.links.size())];
         const QueueId q = s.queues.size();
         s.queues.push_back({q, l.id, 8000.0, 1, 0.0});
         l.queue_ids.push_back(q);
       }},
      {ViolationKind::QueueOwnership,
       [](NetworkSample& s, Rng& r) {
         Queue& q = s.queues[r.below(s.queues.size())];
         q.link_id = (q.link_id + 1) % s.links.size();
       }},
      {ViolationKind::NonPositiveBuffer,
       [](NetworkSample& s, Rng& r) { s.queues[r.below(s.queues.size())].buffer_size = -5.0; }},
      {ViolationKind::NegativeWeight, [](NetworkSample& s, Rng& r) { s.queues[r.below(s.queues.size())].weight = -1.0; }},
      {ViolationKind::NonPositiveRate,
       [](NetworkSample& s, Rng& r) { s.flows[r.below(s.flows.size())].traffic.avg_rate = 0.0; }},
      {ViolationKind::NonPositivePacketSize,
       [](NetworkSample& s, Rng& r) { s.flows[r.below(s.flows.size())].traffic.avg_pkt_size = 0.0; }},
      {ViolationKind::OnOffDurations,
       [](NetworkSample& s, Rng& r) {
         TrafficDescriptor& t = s.flows[r.below(s.flows.size())].traffic;
         t.model = TrafficModel::OnOff;
         t.on_mean = 0.0;
       }},
      {ViolationKind::EmptyPath, [](NetworkSample& s, Rng& r) { s.flows[r.below(s.flows.size())].path.clear(); }},
      {ViolationKind::PathEndpoints,
       [](NetworkSample& s, Rng& r) {
         Flow& f = s.flows[r.below(s.flows.size())];
         f.src_node = (f.src_node + 1) % s.nodes;
       }},
      {ViolationKind::HopQueueNotOnLink,
       [](NetworkSample& s, Rng& r) {
         Flow& f = s.flows[r.below(s.flows.size())];
         f.path[0].queue_id = s.links[(f.path[0].link_id + 1) % s.links.size()].queue_ids[0];
       }},
      {ViolationKind::LabelCount, [](NetworkSample& s, Rng&) { s.labels->flows.pop_back(); }},
      {ViolationKind::LabelRange,
       [](NetworkSample& s, Rng& r) { s.labels->queue_occupancy[r.below(s.queues.size())] = 1.5; }},
      {ViolationKind::LabelRange,
       [](NetworkSample& s, Rng& r) { s.labels->flows[r.below(s.flows.size())].loss_ratio = -0.1; }},
      {ViolationKind::LabelRange,
       [](NetworkSample& s, Rng& r) { s.labels->flows[r.below(s.flows.size())].mean_delay = 0.0; }},
  };
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const NetworkSample base = random_sample(1000 + trial, 5 + trial % 6, 1.0);
    REQUIRE(validate_sample(base).ok());
    const auto& [kind, mutate] = mutations[rng.below(mutations.size())];
    NetworkSample s = base;
    mutate(s, rng);
    const ValidationReport report = validate_sample(s);
    CAPTURE(to_string(kind));
    CAPTURE(report.summary());
    CHECK(report.has(kind));
  }
}

TEST_CASE("samples round-trip through JSON lines") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    NetworkSample s = random_sample(seed, 7, 1.2, true);
    s.meta = SampleMeta{seed * 7, "train", 2};
    const std::string line = sample_to_line(s);
    CHECK(line.find('\n') == std::string::npos);
    const NetworkSample back = sample_from_json(nlohmann::json::parse(line));
    CHECK(sample_to_line(back) == line);
    CHECK(back.links[0].capacity == s.links[0].capacity);
    CHECK(back.labels->flows[0].mean_delay == s.labels->flows[0].mean_delay);
  }
  std::stringstream ss;
  write_samples(ss, {chain(1), chain(3)});
  const auto read = read_samples(ss);
  REQUIRE(read.size() == 2);
  CHECK(read[1].flows[0].path.size() == 3);
}

TEST_CASE("capacity serializes as a c_ref/s_f object") {
  const auto j = sample_to_json(chain(1));
  CHECK(j["links"][0]["capacity"]["c_ref"].get<double>() == 10e6);
  CHECK(j["links"][0]["capacity"]["s_f"].get<double>() == 1.0);
  CHECK(j["links"][0]["sched_policy"] == "FIFO");
}

TEST_CASE("malformed sample lines raise ValidationError") {
  auto j = sample_to_json(chain(1));
  auto missing = j;
  missing.erase("flows");
  CHECK_THROWS_AS(sample_from_json(missing), ValidationError);
  auto wrong_type = j;
  wrong_type["nodes"] = "two";
  CHECK_THROWS_AS(sample_from_json(wrong_type), ValidationError);
  auto future = j;
  future["format_version"] = 99;
  CHECK_THROWS_AS(sample_from_json(future), ValidationError);
  auto bad_enum = j;
  bad_enum["links"][0]["sched_policy"] = "RR";
  CHECK_THROWS_AS(sample_from_json(bad_enum), ValidationError);
  std::stringstream garbage("{not json\n");
  CHECK_THROWS_AS(read_samples(garbage), ValidationError);
}

TEST_CASE("path transmission time sums packet over capacity") {
  const NetworkSample s = chain(3, 2e6, 1e6, 4000.0);
  CHECK(path_transmission_time(s, s.flows[0]) == doctest::Approx(3 * 4000.0 / 2e6));
}
