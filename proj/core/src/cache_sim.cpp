#include "stencilperf/cache_sim.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <ostream>

#include <absl/container/flat_hash_map.h>
#include <fmt/format.h>

namespace sperf {

namespace {

constexpr std::uint32_t kNil = std::numeric_limits<std::uint32_t>::max();

std::uint64_t align_up(std::uint64_t v, std::uint64_t a) { return (v + a - 1) / a * a; }

struct Evicted {
  std::uint64_t line;
  bool dirty;
};

// One cache level: per-set intrusive LRU lists (head = most recent) over a
// fixed slot pool, with a hash index from line number to slot.
class Level {
 public:
  explicit Level(const CacheLevelSpec& spec)
      : spec_(spec),
        sets_(spec.sets()),
        ways_(spec.ways),
        slots_(sets_ * ways_),
        head_(sets_, kNil),
        tail_(sets_, kNil),
        free_(sets_, kNil) {
    for (std::uint64_t s = 0; s < sets_; ++s) {
      for (unsigned w = 0; w < ways_; ++w) {
        const auto idx = static_cast<std::uint32_t>(s * ways_ + w);
        slots_[idx].next = free_[s];
        free_[s] = idx;
      }
    }
    where_.reserve(slots_.size());
  }

  const CacheLevelSpec& spec() const { return spec_; }
  std::size_t size() const { return where_.size(); }

  std::uint32_t find(std::uint64_t line) const {
    const auto it = where_.find(line);
    return it == where_.end() ? kNil : it->second;
  }

  bool dirty(std::uint32_t s) const { return slots_[s].dirty; }
  void set_dirty(std::uint32_t s) { slots_[s].dirty = true; }

  void touch(std::uint32_t s) {
    const auto set = set_of(slots_[s].line);
    if (head_[set] == s) return;
    unlink(set, s);
    push_front(set, s);
  }

  std::optional<Evicted> insert(std::uint64_t line, bool dirty) {
    const auto set = set_of(line);
    std::optional<Evicted> ev;
    std::uint32_t s = free_[set];
    if (s != kNil) {
      free_[set] = slots_[s].next;
    } else {
      s = tail_[set];
      ev = Evicted{slots_[s].line, slots_[s].dirty};
      where_.erase(slots_[s].line);
      unlink(set, s);
    }
    slots_[s].line = line;
    slots_[s].dirty = dirty;
    where_[line] = s;
    push_front(set, s);
    return ev;
  }

  // Drops the line if present and reports whether it was dirty.
  std::optional<bool> remove(std::uint64_t line) {
    const auto it = where_.find(line);
    if (it == where_.end()) return std::nullopt;
    const auto s = it->second;
    where_.erase(it);
    const auto set = set_of(line);
    unlink(set, s);
    const bool d = slots_[s].dirty;
    slots_[s].dirty = false;
    slots_[s].next = free_[set];
    free_[set] = s;
    return d;
  }

 private:
  struct Slot {
    std::uint64_t line = 0;
    std::uint32_t prev = kNil;
    std::uint32_t next = kNil;
    bool dirty = false;
  };

  std::uint64_t set_of(std::uint64_t line) const { return line % sets_; }

  void unlink(std::uint64_t set, std::uint32_t s) {
    auto& sl = slots_[s];
    if (sl.prev != kNil) slots_[sl.prev].next = sl.next; else head_[set] = sl.next;
    if (sl.next != kNil) slots_[sl.next].prev = sl.prev; else tail_[set] = sl.prev;
    sl.prev = sl.next = kNil;
  }

  void push_front(std::uint64_t set, std::uint32_t s) {
    auto& sl = slots_[s];
    sl.prev = kNil;
    sl.next = head_[set];
    if (head_[set] != kNil) slots_[head_[set]].prev = s;
    head_[set] = s;
    if (tail_[set] == kNil) tail_[set] = s;
  }

  CacheLevelSpec spec_;
  std::uint64_t sets_;
  unsigned ways_;
  std::vector<Slot> slots_;
  std::vector<std::uint32_t> head_, tail_, free_;
  absl::flat_hash_map<std::uint64_t, std::uint32_t> where_;
};

}  // namespace

struct CacheHierarchySim::Impl {
  std::vector<CacheLevelSpec> specs;
  std::vector<Level> levels;
  std::vector<LevelCounters> counters;
  std::vector<LinkCounters> links;
  unsigned line_size = 64;
  unsigned shift = 6;
  std::size_t element_bytes = 8;

  std::size_t n() const { return levels.size(); }
  bool victim_below(std::size_t i) const { return i + 1 < n() && levels[i + 1].spec().victim; }

  // A store that does not allocate in level i travels on to level i+1.
  void forward_store(std::size_t i, std::uint64_t line) {
    links[i].store_bytes += element_bytes;
    if (i + 1 < n() && !levels[i + 1].spec().victim) request(i + 1, line, true);
  }

  void request(std::size_t i, std::uint64_t line, bool store) {
    Level& L = levels[i];
    auto& c = counters[i];
    const auto& spec = L.spec();
    if (const auto s = L.find(line); s != kNil) {
      ++c.hits;
      L.touch(s);
      if (store) {
        if (spec.write_back) L.set_dirty(s); else forward_store(i, line);
      }
      return;
    }
    ++c.misses;
    if (store && !spec.write_allocate) {
      forward_store(i, line);
      return;
    }
    bool dirty_in = false;
    if (victim_below(i)) {
      dirty_in = victim_lookup(i + 1, line);
    } else {
      links[i].load_bytes += line_size;
      if (i + 1 < n()) request(i + 1, line, false);
    }
    if (store && !spec.write_back) forward_store(i, line);
    insert(i, line, dirty_in || (store && spec.write_back));
  }

  // Looks the line up in victim level v on behalf of level v-1. A hit hands the
  // line (and its dirty state) back up; a miss fetches it from memory.
  bool victim_lookup(std::size_t v, std::uint64_t line) {
    if (const auto d = levels[v].remove(line)) {
      ++counters[v].hits;
      links[v - 1].load_bytes += line_size;
      return *d;
    }
    ++counters[v].misses;
    links[v].load_bytes += line_size;
    return false;
  }

  void insert(std::size_t i, std::uint64_t line, bool dirty) {
    Level& L = levels[i];
    const auto ev = L.insert(line, dirty);
    if (!ev) return;
    auto& c = counters[i];
    ++c.evictions;
    bool ev_dirty = ev->dirty;
    if (!L.spec().victim) {
      for (std::size_t j = 0; j < i; ++j)
        if (const auto d = levels[j].remove(ev->line)) ev_dirty = ev_dirty || *d;
    }
    if (ev_dirty) ++c.write_backs;
    if (victim_below(i)) {
      links[i].store_bytes += line_size;
      insert(i + 1, ev->line, ev_dirty);
      return;
    }
    if (!ev_dirty) return;
    links[i].store_bytes += line_size;
    if (i + 1 == n()) return;
    Level& below = levels[i + 1];
    if (const auto s = below.find(ev->line); s != kNil) {
      below.set_dirty(s);
    } else {
      insert(i + 1, ev->line, true);
    }
  }
};

CacheHierarchySim::CacheHierarchySim(std::vector<CacheLevelSpec> levels, std::size_t element_bytes)
    : impl_(std::make_unique<Impl>()) {
  if (levels.empty()) throw SimulationError("cache hierarchy needs at least one level");
  auto& im = *impl_;
  im.line_size = levels.front().line_size;
  if (!std::has_single_bit(im.line_size))
    throw SimulationError(fmt::format("line size {} is not a power of two", im.line_size));
  im.shift = static_cast<unsigned>(std::countr_zero(im.line_size));
  im.element_bytes = element_bytes;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& l = levels[i];
    if (l.line_size != im.line_size)
      throw SimulationError("all simulated levels must share one line size");
    if (l.ways == 0 || l.sets() == 0 || l.sets() * l.ways * l.line_size != l.size_bytes)
      throw SimulationError(fmt::format("level {} has an inconsistent geometry", l.name));
    if (l.victim && (i == 0 || i + 1 != levels.size()))
      throw SimulationError(fmt::format("victim level {} must be the last level below another", l.name));
    if (l.victim && !levels[i - 1].write_back)
      throw SimulationError(fmt::format("the level above victim level {} must be write-back", l.name));
    im.levels.emplace_back(l);
  }
  im.specs = std::move(levels);
  im.counters.resize(im.n());
  im.links.resize(im.n());
}

CacheHierarchySim::~CacheHierarchySim() = default;
CacheHierarchySim::CacheHierarchySim(CacheHierarchySim&&) noexcept = default;
CacheHierarchySim& CacheHierarchySim::operator=(CacheHierarchySim&&) noexcept = default;

bool CacheHierarchySim::access(const MemoryAccess& a) {
  const auto line = a.address >> impl_->shift;
  const auto hits = impl_->counters[0].hits;
  impl_->request(0, line, a.kind == AccessKind::store);
  return impl_->counters[0].hits != hits;
}

void CacheHierarchySim::reset_counters() {
  std::fill(impl_->counters.begin(), impl_->counters.end(), LevelCounters{});
  std::fill(impl_->links.begin(), impl_->links.end(), LinkCounters{});
}

bool CacheHierarchySim::contains(std::size_t level, std::uint64_t address) const {
  return impl_->levels.at(level).find(address >> impl_->shift) != kNil;
}

bool CacheHierarchySim::is_dirty(std::size_t level, std::uint64_t address) const {
  const auto& L = impl_->levels.at(level);
  const auto s = L.find(address >> impl_->shift);
  return s != kNil && L.dirty(s);
}

std::size_t CacheHierarchySim::resident_lines(std::size_t level) const {
  return impl_->levels.at(level).size();
}

const std::vector<CacheLevelSpec>& CacheHierarchySim::levels() const { return impl_->specs; }
const LevelCounters& CacheHierarchySim::counters(std::size_t level) const {
  return impl_->counters.at(level);
}
const LinkCounters& CacheHierarchySim::link(std::size_t level) const {
  return impl_->links.at(level);
}

ArrayLayout array_layout(const KernelIR& kernel, const GridDims& dims, unsigned line_size) {
  const std::uint64_t bytes = align_up(dims.points() * kernel.spec.element_bytes(), line_size);
  ArrayLayout l;
  l.read_base = 0;
  l.write_base = bytes;
  std::uint64_t next = 2 * bytes;
  for (std::size_t c = 0; c < kernel.weight_components(); ++c) {
    l.weight_bases.push_back(next);
    next += bytes;
  }
  l.end = next;
  return l;
}

void for_each_access(const KernelIR& kernel, const GridDims& dims, const Traversal& traversal,
                     unsigned line_size, const std::function<void(const MemoryAccess&)>& sink) {
  dims.validate(kernel.spec);
  if (traversal.block && traversal.block->size < 1)
    throw SpecError("block size must be at least 1");
  const auto layout = array_layout(kernel, dims, line_size);
  const auto eb = static_cast<std::int64_t>(kernel.spec.element_bytes());
  const auto st = dims.strides();

  // Per-point relative byte addresses, deduplicated in expression order.
  std::vector<std::int64_t> loads;
  auto add = [&](std::int64_t rel) {
    if (std::find(loads.begin(), loads.end(), rel) == loads.end()) loads.push_back(rel);
  };
  auto weight = [&](std::size_t c) { return static_cast<std::int64_t>(layout.weight_bases[c]); };
  auto data = [&](const Offset& o) {
    return static_cast<std::int64_t>(layout.read_base) + (o[0] * st[0] + o[1] * st[1] + o[2]) * eb;
  };
  const bool homogeneous = kernel.spec.weighting == Weighting::homogeneous;
  if (homogeneous && kernel.variable_coefficients()) add(weight(0));
  for (const auto& t : kernel.terms) {
    if (!homogeneous && kernel.variable_coefficients()) add(weight(t.coefficient.index));
    add(data(t.offset));
  }
  const auto store_rel = static_cast<std::int64_t>(layout.write_base);

  const long r = kernel.spec.radius;
  const bool three_d = kernel.spec.dimensions == 3;
  const long k0 = three_d ? r : 0, k1 = three_d ? dims.M - r : 1;
  const long j0 = r, j1 = dims.N - r, i0 = r, i1 = dims.P - r;
  auto point = [&](long k, long j, long i) {
    const std::int64_t c = (k * st[0] + j * st[1] + i) * eb;
    for (const auto rel : loads)
      sink({AccessKind::load, static_cast<std::uint64_t>(rel + c)});
    sink({AccessKind::store, static_cast<std::uint64_t>(store_rel + c)});
  };
  if (!traversal.block) {
    for (long k = k0; k < k1; ++k)
      for (long j = j0; j < j1; ++j)
        for (long i = i0; i < i1; ++i) point(k, j, i);
    return;
  }
  const long bs = traversal.block->size;
  for (long jb = j0; jb < j1; jb += bs) {
    const long jend = std::min(jb + bs, j1);
    for (long k = k0; k < k1; ++k)
      for (long j = jb; j < jend; ++j)
        for (long i = i0; i < i1; ++i) point(k, j, i);
  }
}

std::vector<MemoryAccess> address_stream(const KernelIR& kernel, const GridDims& dims,
                                         const Traversal& traversal, unsigned line_size) {
  std::vector<MemoryAccess> out;
  for_each_access(kernel, dims, traversal, line_size,
                  [&](const MemoryAccess& a) { out.push_back(a); });
  return out;
}

void dump_trace(std::ostream& os, const KernelIR& kernel, const GridDims& dims,
                const Traversal& traversal, unsigned line_size) {
  for_each_access(kernel, dims, traversal, line_size, [&](const MemoryAccess& a) {
    os << (a.kind == AccessKind::load ? 'L' : 'S') << " 0x" << fmt::format("{:x}", a.address)
       << '\n';
  });
}

SimulationResult simulate_cache(const KernelIR& kernel, const MachineModel& machine,
                                const GridDims& dims, const SimulationOptions& options) {
  dims.validate(kernel.spec);
  if (dims.points() > options.element_budget)
    throw SimulationError(fmt::format(
        "refusing to simulate {} points per array ({}x{}x{}): element budget is {}",
        dims.points(), dims.M, dims.N, dims.P, options.element_budget));
  if (options.warmup_sweeps < 0) throw SimulationError("warm-up sweep count must not be negative");

  const unsigned line = machine.cache_levels.front().line_size;
  CacheHierarchySim sim(machine.cache_levels, kernel.spec.element_bytes());
  for (int s = 0; s < options.warmup_sweeps; ++s)
    for_each_access(kernel, dims, options.traversal, line,
                    [&](const MemoryAccess& a) { sim.access(a); });
  sim.reset_counters();

  SimulationResult res;
  for_each_access(kernel, dims, options.traversal, line, [&](const MemoryAccess& a) {
    sim.access(a);
    ++res.accesses;
    if (options.trace)
      *options.trace << (a.kind == AccessKind::load ? 'L' : 'S') << " 0x"
                     << fmt::format("{:x}", a.address) << '\n';
  });

  const double cls = static_cast<double>(dims.interior_points(kernel.spec.radius)) /
                     lups_per_cl(line, kernel.spec.element_bytes());
  const auto names = link_names(machine);
  res.traffic.predictor = Predictor::simulation;
  res.traffic.reg_loads = kernel.op_counts.loads;
  res.traffic.reg_stores = kernel.op_counts.stores;
  for (std::size_t i = 0; i < machine.cache_levels.size(); ++i) {
    res.counters.push_back(sim.counters(i));
    res.links.push_back(sim.link(i));
    res.traffic.links.push_back({names[i], static_cast<double>(sim.link(i).load_bytes) / cls,
                                 static_cast<double>(sim.link(i).store_bytes) / cls});
  }
  return res;
}

}  // namespace sperf
