#include "netdt/sample_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "netdt/errors.hpp"

namespace netdt {

using nlohmann::json;

namespace {

json capacity_to_json(const CapacityFactor& c) { return {{"c_ref", c.c_ref}, {"s_f", c.s_f}}; }

template <typename T>
T get(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ValidationError(std::string("missing key '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad value for '") + key + "': " + e.what());
  }
}

const json& get_array(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_array()) {
    throw ValidationError(std::string("missing array '") + key + "'");
  }
  return *it;
}

}  // namespace

json sample_to_json(const NetworkSample& s) {
  json links = json::array();
  for (const Link& l : s.links) {
    links.push_back({{"id", l.id},
                     {"src_node", l.src_node},
                     {"dst_node", l.dst_node},
                     {"capacity", capacity_to_json(l.capacity)},
                     {"sched_policy", to_string(l.sched_policy)},
                     {"queue_ids", l.queue_ids}});
  }
  json queues = json::array();
  for (const Queue& q : s.queues) {
    queues.push_back({{"id", q.id},
                      {"link_id", q.link_id},
                      {"buffer_size", q.buffer_size},
                      {"priority", q.priority},
                      {"weight", q.weight}});
  }
  json flows = json::array();
  for (const Flow& f : s.flows) {
    json path = json::array();
    for (const Hop& h : f.path) path.push_back({{"queue_id", h.queue_id}, {"link_id", h.link_id}});
    const TrafficDescriptor& t = f.traffic;
    json traffic = {{"model", to_string(t.model)},
                    {"avg_rate", t.avg_rate},
                    {"avg_pkt_size", t.avg_pkt_size},
                    {"pkt_size_dist", to_string(t.pkt_size_dist)}};
    if (t.model == TrafficModel::OnOff) {
      traffic["on_mean"] = t.on_mean;
      traffic["off_mean"] = t.off_mean;
    }
    flows.push_back({{"id", f.id},
                     {"src_node", f.src_node},
                     {"dst_node", f.dst_node},
                     {"path", std::move(path)},
                     {"traffic", std::move(traffic)}});
  }
  json j = {{"format_version", kSampleFormatVersion},
            {"nodes", s.nodes},
            {"links", std::move(links)},
            {"queues", std::move(queues)},
            {"flows", std::move(flows)}};
  if (s.labels) {
    json lf = json::array();
    for (const FlowLabels& fl : s.labels->flows) {
      lf.push_back(
          {{"mean_delay", fl.mean_delay}, {"jitter", fl.jitter}, {"loss_ratio", fl.loss_ratio}});
    }
    json lq = json::array();
    for (double o : s.labels->queue_occupancy) lq.push_back({{"mean_occupancy", o}});
    j["labels"] = {{"flows", std::move(lf)}, {"queues", std::move(lq)}};
  }
  if (s.meta) {
    j["meta"] = {
        {"topo_seed", s.meta->topo_seed}, {"split", s.meta->split}, {"variant", s.meta->variant}};
  }
  return j;
}

NetworkSample sample_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("sample line is not a JSON object");
  if (auto it = j.find("format_version"); it != j.end()) {
    if (!it->is_number_integer() || it->get<int>() != kSampleFormatVersion) {
      throw ValidationError("unsupported sample format_version " + it->dump());
    }
  }
  NetworkSample s;
  s.nodes = get<std::size_t>(j, "nodes");
  for (const json& jl : get_array(j, "links")) {
    Link l;
    l.id = get<std::size_t>(jl, "id");
    l.src_node = get<std::size_t>(jl, "src_node");
    l.dst_node = get<std::size_t>(jl, "dst_node");
    const json cap = get<json>(jl, "capacity");
    l.capacity = {get<double>(cap, "c_ref"), get<double>(cap, "s_f")};
    l.sched_policy = parse_sched_policy(get<std::string>(jl, "sched_policy"));
    l.queue_ids = get<std::vector<std::size_t>>(jl, "queue_ids");
    s.links.push_back(std::move(l));
  }
  for (const json& jq : get_array(j, "queues")) {
    Queue q;
    q.id = get<std::size_t>(jq, "id");
    q.link_id = get<std::size_t>(jq, "link_id");
    q.buffer_size = get<double>(jq, "buffer_size");
    q.priority = get<int>(jq, "priority");
    q.weight = get<double>(jq, "weight");
    s.queues.push_back(q);
  }
  for (const json& jf : get_array(j, "flows")) {
    Flow f;
    f.id = get<std::size_t>(jf, "id");
    f.src_node = get<std::size_t>(jf, "src_node");
    f.dst_node = get<std::size_t>(jf, "dst_node");
    for (const json& jh : get_array(jf, "path")) {
      f.path.push_back({get<std::size_t>(jh, "queue_id"), get<std::size_t>(jh, "link_id")});
    }
    const json jt = get<json>(jf, "traffic");
    TrafficDescriptor& t = f.traffic;
    t.model = parse_traffic_model(get<std::string>(jt, "model"));
    t.avg_rate = get<double>(jt, "avg_rate");
    t.avg_pkt_size = get<double>(jt, "avg_pkt_size");
    t.pkt_size_dist = parse_pkt_size_dist(get<std::string>(jt, "pkt_size_dist"));
    if (t.model == TrafficModel::OnOff) {
      t.on_mean = get<double>(jt, "on_mean");
      t.off_mean = get<double>(jt, "off_mean");
    }
    s.flows.push_back(std::move(f));
  }
  if (auto it = j.find("labels"); it != j.end() && !it->is_null()) {
    PerformanceLabels lab;
    for (const json& jl : get_array(*it, "flows")) {
      lab.flows.push_back({get<double>(jl, "mean_delay"), get<double>(jl, "jitter"),
                           get<double>(jl, "loss_ratio")});
    }
    for (const json& jq : get_array(*it, "queues")) {
      lab.queue_occupancy.push_back(get<double>(jq, "mean_occupancy"));
    }
    s.labels = std::move(lab);
  }
  if (auto it = j.find("meta"); it != j.end() && it->is_object()) {
    SampleMeta m;
    m.topo_seed = it->value("topo_seed", std::uint64_t{0});
    m.split = it->value("split", std::string{});
    m.variant = it->value("variant", 0);
    s.meta = std::move(m);
  }
  return s;
}

std::string sample_to_line(const NetworkSample& sample) { return sample_to_json(sample).dump(); }

std::vector<NetworkSample> read_samples(std::istream& in) {
  std::vector<NetworkSample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(sample_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<NetworkSample> read_samples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return read_samples(in);
}

void write_samples(std::ostream& out, const std::vector<NetworkSample>& samples) {
  for (const NetworkSample& s : samples) out << sample_to_line(s) << '\n';
}

void write_samples(const std::filesystem::path& path, const std::vector<NetworkSample>& samples) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  write_samples(out, samples);
}

}  // namespace netdt
