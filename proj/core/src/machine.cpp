#include "stencilperf/machine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <yaml-cpp/yaml.h>

namespace sperf {

std::string_view to_string(Duplex d) { return d == Duplex::full ? "full" : "half"; }

std::string_view to_string(OverlapPolicy p) {
  return p == OverlapPolicy::intel_no_overlap ? "intel_no_overlap" : "zen_partial_overlap";
}

namespace {

// Schema helpers. Every lookup goes through a path so errors can name the field.
class Fields {
 public:
  Fields(const YAML::Node& node, std::string path, std::set<std::string> allowed)
      : node_(node), path_(std::move(path)) {
    if (!node_.IsMap()) throw MachineError(fmt::format("{}: expected a mapping", display()));
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key))
        throw MachineError(fmt::format("{}: unknown key", child(key)));
    }
  }

  YAML::Node required(const std::string& key) const {
    const YAML::Node n = node_[key];
    if (!n.IsDefined() || n.IsNull()) throw MachineError(fmt::format("{}: missing", child(key)));
    return n;
  }

  std::string str(const std::string& key) const {
    const auto n = required(key);
    if (!n.IsScalar()) throw MachineError(fmt::format("{}: expected a string", child(key)));
    return n.as<std::string>();
  }

  double num(const std::string& key) const {
    const auto n = required(key);
    try {
      return n.as<double>();
    } catch (const YAML::Exception&) {
      throw MachineError(fmt::format("{}: expected a number, got '{}'", child(key), text(n)));
    }
  }

  long long integer(const std::string& key) const {
    const auto n = required(key);
    try {
      return n.as<long long>();
    } catch (const YAML::Exception&) {
      throw MachineError(fmt::format("{}: expected an integer, got '{}'", child(key), text(n)));
    }
  }

  bool boolean(const std::string& key) const {
    const auto n = required(key);
    try {
      return n.as<bool>();
    } catch (const YAML::Exception&) {
      throw MachineError(fmt::format("{}: expected true or false, got '{}'", child(key), text(n)));
    }
  }

  std::string child(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  static std::string text(const YAML::Node& n) { return n.IsScalar() ? n.Scalar() : "<non-scalar>"; }
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  YAML::Node node_;
  std::string path_;
};

template <typename T>
T checked_int(long long v, const std::string& field, long long lo) {
  constexpr auto hi = std::numeric_limits<T>::max();
  if (v < lo || static_cast<unsigned long long>(v) > static_cast<unsigned long long>(hi))
    throw MachineError(fmt::format("{}: value {} out of range (minimum {})", field, v, lo));
  return static_cast<T>(v);
}

double positive(double v, const std::string& field) {
  if (!(v > 0) || !std::isfinite(v))
    throw MachineError(fmt::format("{}: must be positive, got {}", field, v));
  return v;
}

bool is_pow2(std::uint64_t v) { return v && !(v & (v - 1)); }

CacheLevelSpec parse_level(const YAML::Node& node, const std::string& path) {
  const Fields f(node, path,
                 {"name", "size_bytes", "ways", "line_size_bytes", "write_allocate", "write_back",
                  "victim", "upstream_bandwidth_bytes_per_cycle", "duplex"});
  CacheLevelSpec c;
  c.name = f.str("name");
  c.size_bytes = checked_int<std::uint64_t>(f.integer("size_bytes"), f.child("size_bytes"), 1);
  c.ways = checked_int<unsigned>(f.integer("ways"), f.child("ways"), 1);
  c.line_size = checked_int<unsigned>(f.integer("line_size_bytes"), f.child("line_size_bytes"), 1);
  c.write_allocate = f.boolean("write_allocate");
  c.write_back = f.boolean("write_back");
  c.victim = f.boolean("victim");
  c.upstream_bandwidth = positive(f.num("upstream_bandwidth_bytes_per_cycle"),
                                  f.child("upstream_bandwidth_bytes_per_cycle"));
  const auto duplex = f.str("duplex");
  if (duplex == "full") {
    c.duplex = Duplex::full;
  } else if (duplex == "half") {
    c.duplex = Duplex::half;
  } else {
    throw MachineError(fmt::format("{}: expected full or half, got '{}'", f.child("duplex"), duplex));
  }
  return c;
}

}  // namespace

const CacheLevelSpec& MachineModel::level(std::string_view level_name) const {
  for (const auto& l : cache_levels)
    if (l.name == level_name) return l;
  throw MachineError(fmt::format("machine '{}' has no cache level '{}'", name, level_name));
}

void MachineModel::validate() const {
  positive(clock_hz, "clock_hz");
  if (cores_per_socket < 1) throw MachineError("cores_per_socket: must be at least 1");
  if (cores_per_numa_domain < 1) throw MachineError("cores_per_numa_domain: must be at least 1");
  if (cores_per_socket % cores_per_numa_domain != 0)
    throw MachineError(fmt::format("cores_per_numa_domain: {} does not divide cores_per_socket {}",
                                   cores_per_numa_domain, cores_per_socket));
  positive(mem_bandwidth.per_numa_domain, "memory.bandwidth_per_numa_domain_bytes_per_s");
  positive(mem_bandwidth.per_socket, "memory.bandwidth_per_socket_bytes_per_s");
  if (mem_bandwidth.per_socket < mem_bandwidth.per_numa_domain)
    throw MachineError(
        "memory.bandwidth_per_socket_bytes_per_s: smaller than the per-NUMA-domain bandwidth");

  if (ports.vector_bits < 32 || ports.vector_bits % 32 != 0)
    throw MachineError(fmt::format("ports.vector_bits: {} is not a positive multiple of 32",
                                   ports.vector_bits));
  if (ports.load_width_bits < 32 || ports.load_width_bits % 32 != 0)
    throw MachineError("ports.load_width_bits: must be a positive multiple of 32");
  if (ports.store_width_bits < 32 || ports.store_width_bits % 32 != 0)
    throw MachineError("ports.store_width_bits: must be a positive multiple of 32");
  if (ports.fp_ports < 0) throw MachineError("ports.fp_ports: must not be negative");
  if (ports.load_ports < 1) throw MachineError("ports.load_ports: must be at least 1");
  if (ports.store_ports < 1) throw MachineError("ports.store_ports: must be at least 1");

  if (cache_levels.size() != 3)
    throw MachineError(fmt::format("cache_levels: expected 3 levels (L1, L2, L3), got {}",
                                   cache_levels.size()));
  std::set<std::string> names;
  for (std::size_t i = 0; i < cache_levels.size(); ++i) {
    const auto& c = cache_levels[i];
    const auto path = fmt::format("cache_levels[{}]", i);
    if (c.name.empty()) throw MachineError(path + ".name: must not be empty");
    if (!names.insert(c.name).second)
      throw MachineError(fmt::format("{}.name: duplicate level name '{}'", path, c.name));
    if (!is_pow2(c.line_size))
      throw MachineError(fmt::format("{}.line_size_bytes: {} is not a power of two", path,
                                     c.line_size));
    if (c.line_size != cache_levels.front().line_size)
      throw MachineError(path + ".line_size_bytes: all levels must share one line size");
    if (c.ways == 0 || c.size_bytes % (static_cast<std::uint64_t>(c.ways) * c.line_size) != 0)
      throw MachineError(fmt::format("{}.size_bytes: {} is not divisible by ways*line_size = {}",
                                     path, c.size_bytes,
                                     static_cast<std::uint64_t>(c.ways) * c.line_size));
    positive(c.upstream_bandwidth, path + ".upstream_bandwidth_bytes_per_cycle");
    if (i > 0 && c.size_bytes <= cache_levels[i - 1].size_bytes)
      throw MachineError(fmt::format("{}.size_bytes: {} is not larger than {} ({})", path,
                                     c.size_bytes, cache_levels[i - 1].name,
                                     cache_levels[i - 1].size_bytes));
    if (c.victim && i + 1 != cache_levels.size())
      throw MachineError(path + ".victim: only the last level may be a victim cache");
  }
}

MachineModel parse_machine(std::string_view yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception& e) {
    throw MachineError(fmt::format("machine file does not parse: {}", e.what()));
  }
  const Fields f(root, "",
                 {"name", "clock_hz", "cores_per_socket", "cores_per_numa_domain", "memory",
                  "overlap_policy", "compiler_flags", "ports", "cache_levels"});
  MachineModel m;
  m.name = f.str("name");
  m.clock_hz = positive(f.num("clock_hz"), "clock_hz");
  m.cores_per_socket = checked_int<int>(f.integer("cores_per_socket"), "cores_per_socket", 1);
  m.cores_per_numa_domain =
      checked_int<int>(f.integer("cores_per_numa_domain"), "cores_per_numa_domain", 1);
  m.compiler_flags = f.str("compiler_flags");

  const auto policy = f.str("overlap_policy");
  if (policy == "intel_no_overlap") {
    m.overlap_policy = OverlapPolicy::intel_no_overlap;
  } else if (policy == "zen_partial_overlap") {
    m.overlap_policy = OverlapPolicy::zen_partial_overlap;
  } else {
    throw MachineError(fmt::format(
        "overlap_policy: expected intel_no_overlap or zen_partial_overlap, got '{}'", policy));
  }

  const Fields mem(f.required("memory"), "memory",
                   {"bandwidth_per_numa_domain_bytes_per_s", "bandwidth_per_socket_bytes_per_s"});
  m.mem_bandwidth.per_numa_domain = positive(mem.num("bandwidth_per_numa_domain_bytes_per_s"),
                                             "memory.bandwidth_per_numa_domain_bytes_per_s");
  m.mem_bandwidth.per_socket = positive(mem.num("bandwidth_per_socket_bytes_per_s"),
                                        "memory.bandwidth_per_socket_bytes_per_s");

  const Fields p(f.required("ports"), "ports",
                 {"vector_bits", "fma", "fp_ports", "load_ports", "store_ports", "load_width_bits",
                  "store_width_bits"});
  m.ports.vector_bits = checked_int<int>(p.integer("vector_bits"), "ports.vector_bits", 1);
  m.ports.fma = p.boolean("fma");
  m.ports.fp_ports = checked_int<int>(p.integer("fp_ports"), "ports.fp_ports", 0);
  m.ports.load_ports = checked_int<int>(p.integer("load_ports"), "ports.load_ports", 1);
  m.ports.store_ports = checked_int<int>(p.integer("store_ports"), "ports.store_ports", 1);
  m.ports.load_width_bits =
      checked_int<int>(p.integer("load_width_bits"), "ports.load_width_bits", 1);
  m.ports.store_width_bits =
      checked_int<int>(p.integer("store_width_bits"), "ports.store_width_bits", 1);

  const auto levels = f.required("cache_levels");
  if (!levels.IsSequence()) throw MachineError("cache_levels: expected a list");
  for (std::size_t i = 0; i < levels.size(); ++i)
    m.cache_levels.push_back(parse_level(levels[i], fmt::format("cache_levels[{}]", i)));

  m.validate();
  return m;
}

MachineModel load_machine(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MachineError(fmt::format("cannot open machine file '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_machine(ss.str());
  } catch (const MachineError& e) {
    throw MachineError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

std::string serialize_machine(const MachineModel& m) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << m.name;
  out << YAML::Key << "clock_hz" << YAML::Value << m.clock_hz;
  out << YAML::Key << "cores_per_socket" << YAML::Value << m.cores_per_socket;
  out << YAML::Key << "cores_per_numa_domain" << YAML::Value << m.cores_per_numa_domain;
  out << YAML::Key << "memory" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "bandwidth_per_numa_domain_bytes_per_s" << YAML::Value
      << m.mem_bandwidth.per_numa_domain;
  out << YAML::Key << "bandwidth_per_socket_bytes_per_s" << YAML::Value
      << m.mem_bandwidth.per_socket;
  out << YAML::EndMap;
  out << YAML::Key << "overlap_policy" << YAML::Value << std::string(to_string(m.overlap_policy));
  out << YAML::Key << "compiler_flags" << YAML::Value << YAML::DoubleQuoted << m.compiler_flags;
  out << YAML::Key << "ports" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "vector_bits" << YAML::Value << m.ports.vector_bits;
  out << YAML::Key << "fma" << YAML::Value << m.ports.fma;
  out << YAML::Key << "fp_ports" << YAML::Value << m.ports.fp_ports;
  out << YAML::Key << "load_ports" << YAML::Value << m.ports.load_ports;
  out << YAML::Key << "store_ports" << YAML::Value << m.ports.store_ports;
  out << YAML::Key << "load_width_bits" << YAML::Value << m.ports.load_width_bits;
  out << YAML::Key << "store_width_bits" << YAML::Value << m.ports.store_width_bits;
  out << YAML::EndMap;
  out << YAML::Key << "cache_levels" << YAML::Value << YAML::BeginSeq;
  for (const auto& c : m.cache_levels) {
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted << c.name;
    out << YAML::Key << "size_bytes" << YAML::Value << c.size_bytes;
    out << YAML::Key << "ways" << YAML::Value << c.ways;
    out << YAML::Key << "line_size_bytes" << YAML::Value << c.line_size;
    out << YAML::Key << "write_allocate" << YAML::Value << c.write_allocate;
    out << YAML::Key << "write_back" << YAML::Value << c.write_back;
    out << YAML::Key << "victim" << YAML::Value << c.victim;
    out << YAML::Key << "upstream_bandwidth_bytes_per_cycle" << YAML::Value
        << c.upstream_bandwidth;
    out << YAML::Key << "duplex" << YAML::Value << std::string(to_string(c.duplex));
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

double cycles_per_cl(const CacheLevelSpec& level, double load_bytes, double store_bytes) {
  const double volume =
      level.duplex == Duplex::full ? std::max(load_bytes, store_bytes) : load_bytes + store_bytes;
  return volume / level.upstream_bandwidth;
}

double effective_size(const CacheLevelSpec& level, double safety) {
  if (!(safety > 0.0 && safety <= 1.0))
    throw std::invalid_argument(fmt::format("safety factor {} outside (0, 1]", safety));
  return static_cast<double>(level.size_bytes) * safety;
}

double mem_cycles_per_cl(const MachineModel& machine, double bytes) {
  return bytes / (machine.mem_bandwidth.per_numa_domain / machine.clock_hz);
}

}  // namespace sperf
