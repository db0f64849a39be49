#include "gridshield/reachability.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <string>

#include "gridshield/parallel.hpp"

namespace gridshield {

namespace {

constexpr double kTopNudge = 1e-9;

std::vector<double> lattice(double lo, double width, std::uint32_t n) {
  if (n == 1) return {lo + 0.5 * width};
  std::vector<double> out(n);
  const double step = width * (1.0 - kTopNudge) / (n - 1);
  for (std::uint32_t i = 0; i < n; ++i) out[i] = lo + i * step;
  return out;
}

std::vector<double> quantiles(double lo, double hi, std::uint32_t m) {
  if (m == 1) return {0.5 * (lo + hi)};
  std::vector<double> out(m);
  for (std::uint32_t i = 0; i < m; ++i) out[i] = lo + (hi - lo) * i / (m - 1);
  out.back() = hi;
  return out;
}

template <class T>
std::vector<std::vector<T>> cartesian(const std::vector<std::vector<T>>& axes) {
  std::vector<std::vector<T>> out{{}};
  for (const auto& axis : axes) {
    std::vector<std::vector<T>> next;
    next.reserve(out.size() * axis.size());
    for (const auto& prefix : out)
      for (const T& v : axis) {
        auto row = prefix;
        row.push_back(v);
        next.push_back(std::move(row));
      }
    out = std::move(next);
  }
  return out;
}

CellIndex classify_successor(const PartitionSpec& spec, const State& s) {
  auto idx = spec.try_index_of(s);
  return idx ? *idx : TransitionSystem::kOutOfBounds;
}

void check_scheme(const SupportScheme& scheme) {
  if (scheme.n < 1) throw Error(ErrorCode::ConfigError, "supporting points per dimension must be >= 1");
  if (scheme.randomness == RandomnessPolicy::SampledGrid && scheme.m < 1)
    throw Error(ErrorCode::ConfigError, "sampled-grid draws per dimension must be >= 1");
}

}  // namespace

std::vector<State> supporting_points(const CellBox& box, std::uint32_t n) {
  if (n < 1) throw Error(ErrorCode::ConfigError, "supporting points per dimension must be >= 1");
  const std::size_t k = box.low.size();
  std::vector<std::vector<double>> axes(k);
  for (std::size_t d = 0; d < k; ++d) axes[d] = lattice(box.low[d], box.high[d] - box.low[d], n);
  std::vector<State> points;
  for (const auto& row : cartesian(axes)) points.emplace_back(std::span<const double>(row));
  return points;
}

std::vector<std::vector<double>> draw_combinations(std::span<const RandomDimension> dims,
                                                   const SupportScheme& scheme) {
  check_scheme(scheme);
  std::vector<std::vector<double>> axes;
  for (const auto& dim : dims) {
    if (scheme.randomness == RandomnessPolicy::SampledGrid) {
      axes.push_back(quantiles(dim.lo, dim.hi, scheme.m));
    } else if (dim.worst) {
      axes.push_back({*dim.worst});
    } else {
      axes.push_back(dim.lo == dim.hi ? std::vector<double>{dim.lo} : std::vector<double>{dim.lo, dim.hi});
    }
  }
  return cartesian(axes);
}

// ---------------------------------------------------------------------------

TransitionSystem::TransitionSystem(PartitionSpec spec, std::vector<Action> actions)
    : spec_(std::move(spec)), actions_(std::move(actions)) {
  if (actions_.empty() || actions_.size() > kMaxActions)
    throw Error(ErrorCode::ConfigError, "action count must be in 1..8");
  offsets_.assign(spec_.cell_count() * actions_.size() + 1, 0);
}

TransitionSystem::TransitionSystem(PartitionSpec spec, std::vector<Action> actions,
                                   const std::vector<std::vector<CellIndex>>& lists)
    : TransitionSystem(std::move(spec), std::move(actions)) {
  if (lists.size() + 1 != offsets_.size())
    throw Error(ErrorCode::ConfigError, "successor lists must cover every (cell, action)");
  for (std::size_t key = 0; key < lists.size(); ++key) {
    auto list = lists[key];
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    for (CellIndex c : list)
      if (c != kOutOfBounds && c >= spec_.cell_count())
        throw Error(ErrorCode::OutOfBounds, "successor outside the grid");
    successors_.insert(successors_.end(), list.begin(), list.end());
    offsets_[key + 1] = successors_.size();
  }
}

TransitionSystem::TransitionSystem(PartitionSpec spec, std::vector<Action> actions,
                                   std::vector<std::uint64_t> offsets, std::vector<CellIndex> successors)
    : spec_(std::move(spec)), actions_(std::move(actions)), offsets_(std::move(offsets)),
      successors_(std::move(successors)) {
  if (actions_.empty() || actions_.size() > kMaxActions)
    throw Error(ErrorCode::ConfigError, "action count must be in 1..8");
  if (offsets_.size() != spec_.cell_count() * actions_.size() + 1 || offsets_.front() != 0 ||
      offsets_.back() != successors_.size())
    throw Error(ErrorCode::FormatError, "transition offsets do not match the partition");
  for (std::size_t i = 1; i < offsets_.size(); ++i)
    if (offsets_[i] < offsets_[i - 1]) throw Error(ErrorCode::FormatError, "transition offsets decrease");
}

bool TransitionSystem::contains(CellIndex from, ActionId a, CellIndex to) const noexcept {
  auto list = successors(from, a);
  return std::binary_search(list.begin(), list.end(), to);
}

// ---------------------------------------------------------------------------

std::vector<CellIndex> successors(const EnvironmentModel& model, const PartitionSpec& spec, CellIndex cell,
                                  ActionId a, const SupportScheme& scheme) {
  const auto combos = draw_combinations(model.randomness(), scheme);
  std::vector<CellIndex> out;
  for (const State& point : supporting_points(spec.cell_box(cell), scheme.n)) {
    for (const auto& combo : combos) {
      FixedDraws draws(combo);
      out.push_back(classify_successor(spec, model.step(point, a, draws)));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

TransitionSystem build_transition_system(const EnvironmentModel& model, const PartitionSpec& spec,
                                         const SupportScheme& scheme, const BuildOptions& options,
                                         BuildStats* stats) {
  const auto started = std::chrono::steady_clock::now();
  if (!model.matches(spec)) throw Error(ErrorCode::ConfigError, "model bounds differ from partition bounds");
  check_scheme(scheme);
  const auto& actions = model.actions();
  const std::size_t action_count = actions.size();
  const CellIndex cells = spec.cell_count();
  const auto combos = draw_combinations(model.randomness(), scheme);

  const std::size_t offsets_bytes = (cells * action_count + 1) * sizeof(std::uint64_t);
  if (offsets_bytes > options.memory_budget_bytes)
    throw Error(ErrorCode::MemoryBudget, "transition index alone exceeds the memory budget");
  const std::size_t entry_budget = (options.memory_budget_bytes - offsets_bytes) / sizeof(CellIndex);

  struct Chunk {
    std::vector<std::uint32_t> counts;  // per key in the chunk
    std::vector<CellIndex> successors;
    std::uint64_t simulations = 0;
  };
  const std::size_t workers = options.on_witness ? 1 : worker_count(options.workers);
  std::vector<Chunk> chunks(std::max<std::size_t>(1, std::min<std::size_t>(workers, cells)));
  std::atomic<std::size_t> entries{0};

  parallel_chunks(cells, chunks.size(), [&](std::size_t w, std::size_t begin, std::size_t end) {
    Chunk& chunk = chunks[w];
    chunk.counts.reserve((end - begin) * action_count);
    std::vector<CellIndex> found;
    for (std::size_t cell = begin; cell < end; ++cell) {
      const auto points = supporting_points(spec.cell_box(cell), scheme.n);
      for (ActionId a = 0; a < action_count; ++a) {
        found.clear();
        for (const State& point : points) {
          for (const auto& combo : combos) {
            FixedDraws draws(combo);
            const CellIndex to = classify_successor(spec, model.step(point, a, draws));
            ++chunk.simulations;
            if (options.on_witness && std::find(found.begin(), found.end(), to) == found.end())
              options.on_witness(cell, a, point, combo, to);
            found.push_back(to);
          }
        }
        std::sort(found.begin(), found.end());
        found.erase(std::unique(found.begin(), found.end()), found.end());
        chunk.counts.push_back(static_cast<std::uint32_t>(found.size()));
        chunk.successors.insert(chunk.successors.end(), found.begin(), found.end());
        if (entries.fetch_add(found.size()) + found.size() > entry_budget)
          throw Error(ErrorCode::MemoryBudget, "successor store exceeds the memory budget");
      }
    }
  });

  std::vector<std::uint64_t> offsets;
  offsets.reserve(cells * action_count + 1);
  offsets.push_back(0);
  std::vector<CellIndex> flat;
  flat.reserve(entries.load());
  std::uint64_t simulations = 0;
  for (auto& chunk : chunks) {
    for (auto c : chunk.counts) offsets.push_back(offsets.back() + c);
    flat.insert(flat.end(), chunk.successors.begin(), chunk.successors.end());
    simulations += chunk.simulations;
    chunk = Chunk{};
  }
  TransitionSystem ts(spec, actions, std::move(offsets), std::move(flat));
  if (stats) {
    stats->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    stats->cells = cells;
    stats->simulations = simulations;
    stats->transitions = ts.transition_count();
  }
  return ts;
}

// ---------------------------------------------------------------------------

std::vector<CellIndex> exact_successors_box(const RandomWalk& model, const PartitionSpec& spec, CellIndex cell,
                                            ActionId a) {
  const auto& p = model.params();
  const CellBox box = spec.cell_box(cell);
  if (box.low[0] >= p.x_goal || box.low[1] >= p.t_limit) return {cell};
  if (box.high[0] > p.x_goal || box.high[1] > p.t_limit)
    throw Error(ErrorCode::NotBoxAffine, "cell straddles a terminal boundary of the random walk");

  const auto [dx, dt] = model.drift(a);
  const double e = p.epsilon;
  // Same operation order as RandomWalk::step so that boundary values agree bit for bit.
  const double x_lo = box.low[0] + dx + (-e), x_hi = box.high[0] + dx + e;
  const double t_lo = box.low[1] + dt + (-e), t_hi = box.high[1] + dt + e;
  const auto first = [&](std::size_t d, double v) { return spec.index_along(d, v); };
  const auto last = [&](std::size_t d, double v) {
    return static_cast<std::int64_t>(std::ceil((v - spec.lower()[d]) / spec.gamma()[d])) - 1;
  };
  std::vector<CellIndex> out;
  for (auto ix = first(0, x_lo); ix <= last(0, x_hi); ++ix) {
    for (auto it = first(1, t_lo); it <= last(1, t_hi); ++it) {
      CellId id{ix, it};
      out.push_back(spec.in_bounds(id) ? spec.ordinal(id) : TransitionSystem::kOutOfBounds);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

TransitionSystem build_exact_random_walk(const RandomWalk& model, const PartitionSpec& spec) {
  if (!model.matches(spec)) throw Error(ErrorCode::ConfigError, "model bounds differ from partition bounds");
  const std::size_t action_count = model.actions().size();
  std::vector<std::vector<CellIndex>> lists(spec.cell_count() * action_count);
  for (CellIndex c = 0; c < spec.cell_count(); ++c)
    for (ActionId a = 0; a < action_count; ++a) lists[c * action_count + a] = exact_successors_box(model, spec, c, a);
  return TransitionSystem(spec, model.actions(), lists);
}

// ---------------------------------------------------------------------------

double accuracy_estimate(const EnvironmentModel& model, const TransitionSystem& ts, std::uint64_t num_samples,
                         std::uint64_t seed, std::size_t workers) {
  const PartitionSpec& spec = ts.spec();
  if (!model.matches(spec)) throw Error(ErrorCode::ConfigError, "model bounds differ from partition bounds");
  constexpr std::uint64_t kBlock = 4096;
  const std::uint64_t blocks = (num_samples + kBlock - 1) / kBlock;
  std::vector<std::uint64_t> hits(blocks, 0), counted(blocks, 0);
  const auto lower = spec.lower();
  const auto upper = spec.upper();
  const std::size_t action_count = ts.action_count();

  parallel_chunks(blocks, worker_count(workers), [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t b = begin; b < end; ++b) {
      Rng rng(mix_seed(seed, b));
      RandomDraws draws(rng, model.randomness());
      const std::uint64_t n = std::min(kBlock, num_samples - b * kBlock);
      for (std::uint64_t i = 0; i < n; ++i) {
        State s(spec.dim());
        for (std::size_t d = 0; d < spec.dim(); ++d) s[d] = uniform(rng, lower[d], upper[d]);
        const auto a = static_cast<ActionId>(uniform_index(rng, action_count));
        auto from = spec.try_index_of(s);
        if (!from) continue;
        const CellIndex to = classify_successor(spec, model.step(s, a, draws));
        ++counted[b];
        if (ts.contains(*from, a, to)) ++hits[b];
      }
    }
  });
  std::uint64_t h = 0, c = 0;
  for (std::uint64_t b = 0; b < blocks; ++b) {
    h += hits[b];
    c += counted[b];
  }
  return c == 0 ? 0.0 : static_cast<double>(h) / static_cast<double>(c);
}

}  // namespace gridshield
