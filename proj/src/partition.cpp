#include "gridshield/partition.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace gridshield {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::MemoryBudget: return "MemoryBudget";
    case ErrorCode::NotBoxAffine: return "NotBoxAffine";
    case ErrorCode::NotAFixpoint: return "NotAFixpoint";
    case ErrorCode::SizeLimit: return "SizeLimit";
    case ErrorCode::EmptyMenu: return "EmptyMenu";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Mismatch: return "Mismatch";
  }
  return "Unknown";
}

bool CellBox::contains(const State& s) const noexcept {
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] < low[i] || s[i] >= high[i]) return false;
  return true;
}

namespace {

// Floor with the upward snap: r just below an integer counts as that integer.
std::int64_t snapped_floor(double r) noexcept {
  double up = std::ceil(r);
  if (up - r < kSnapTolerance) return static_cast<std::int64_t>(up);
  return static_cast<std::int64_t>(std::floor(r));
}

}  // namespace

PartitionSpec::PartitionSpec(std::vector<double> lower, std::vector<double> upper,
                             std::vector<double> gamma)
    : lower_(std::move(lower)), upper_(std::move(upper)), gamma_(std::move(gamma)) {
  const std::size_t k = lower_.size();
  if (k == 0 || k > kMaxDim)
    throw Error(ErrorCode::ConfigError, "partition dimension must be in 1.." + std::to_string(kMaxDim));
  if (upper_.size() != k || gamma_.size() != k)
    throw Error(ErrorCode::ConfigError, "partition bounds and granularity differ in dimension");
  counts_.resize(k);
  long double product = 1;
  for (std::size_t d = 0; d < k; ++d) {
    if (!std::isfinite(lower_[d]) || !std::isfinite(upper_[d]) || !(lower_[d] < upper_[d]))
      throw Error(ErrorCode::ConfigError, "partition requires lower < upper in dimension " + std::to_string(d));
    if (!std::isfinite(gamma_[d]) || !(gamma_[d] > 0))
      throw Error(ErrorCode::ConfigError, "granularity must be positive in dimension " + std::to_string(d));
    // A ratio a hair above an integer is the integer; (1.3 - 0) / 0.05 must give 26.
    double r = (upper_[d] - lower_[d]) / gamma_[d];
    double down = std::floor(r);
    double n = (r - down < 1e-9 * std::max(1.0, r)) ? down : std::ceil(r);
    if (n < 1) n = 1;
    if (n > static_cast<double>(std::numeric_limits<std::int64_t>::max() / 2))
      throw Error(ErrorCode::Overflow, "cell count overflows along dimension " + std::to_string(d));
    counts_[d] = static_cast<std::int64_t>(n);
    product *= n;
  }
  if (product > static_cast<long double>(std::uint64_t{1} << 62))
    throw Error(ErrorCode::Overflow, "cell count exceeds the addressable range");
  total_ = 1;
  for (auto c : counts_) total_ *= static_cast<CellIndex>(c);
}

std::int64_t PartitionSpec::index_along(std::size_t d, double x) const noexcept {
  return snapped_floor((x - lower_[d]) / gamma_[d]);
}

bool PartitionSpec::in_bounds(const State& s) const noexcept {
  if (s.size() != dim()) return false;
  for (std::size_t d = 0; d < dim(); ++d) {
    if (!(s[d] >= lower_[d]) || !(s[d] < upper_[d])) return false;
    auto i = index_along(d, s[d]);
    if (i < 0 || i >= counts_[d]) return false;
  }
  return true;
}

bool PartitionSpec::in_bounds(const CellId& id) const noexcept {
  if (id.size() != dim()) return false;
  for (std::size_t d = 0; d < dim(); ++d)
    if (id[d] < 0 || id[d] >= counts_[d]) return false;
  return true;
}

CellId PartitionSpec::cell_of(const State& s) const {
  if (s.size() != dim()) throw Error(ErrorCode::OutOfBounds, "state dimension does not match partition");
  CellId id(dim());
  for (std::size_t d = 0; d < dim(); ++d) {
    if (!(s[d] >= lower_[d]) || !(s[d] < upper_[d]))
      throw Error(ErrorCode::OutOfBounds, "coordinate " + std::to_string(d) + " outside partition bounds");
    auto i = index_along(d, s[d]);
    if (i < 0 || i >= counts_[d])
      throw Error(ErrorCode::OutOfBounds, "coordinate " + std::to_string(d) + " snaps outside partition");
    id[d] = i;
  }
  return id;
}

std::optional<CellIndex> PartitionSpec::try_index_of(const State& s) const noexcept {
  if (s.size() != dim()) return std::nullopt;
  CellIndex ord = 0;
  for (std::size_t d = 0; d < dim(); ++d) {
    if (!(s[d] >= lower_[d]) || !(s[d] < upper_[d])) return std::nullopt;
    auto i = index_along(d, s[d]);
    if (i < 0 || i >= counts_[d]) return std::nullopt;
    ord = ord * static_cast<CellIndex>(counts_[d]) + static_cast<CellIndex>(i);
  }
  return ord;
}

CellBox PartitionSpec::cell_box(const CellId& id) const {
  if (!in_bounds(id)) throw Error(ErrorCode::OutOfBounds, "cell index outside the grid");
  CellBox box{State(dim()), State(dim())};
  for (std::size_t d = 0; d < dim(); ++d) {
    box.low[d] = lower_[d] + static_cast<double>(id[d]) * gamma_[d];
    box.high[d] = lower_[d] + static_cast<double>(id[d] + 1) * gamma_[d];
  }
  return box;
}

CellIndex PartitionSpec::ordinal(const CellId& id) const {
  if (!in_bounds(id)) throw Error(ErrorCode::OutOfBounds, "cell index outside the grid");
  CellIndex ord = 0;
  for (std::size_t d = 0; d < dim(); ++d)
    ord = ord * static_cast<CellIndex>(counts_[d]) + static_cast<CellIndex>(id[d]);
  return ord;
}

CellId PartitionSpec::cell_id(CellIndex ordinal) const {
  if (ordinal >= total_) throw Error(ErrorCode::OutOfBounds, "cell ordinal outside the grid");
  CellId id(dim());
  for (std::size_t d = dim(); d-- > 0;) {
    auto n = static_cast<CellIndex>(counts_[d]);
    id[d] = static_cast<std::int64_t>(ordinal % n);
    ordinal /= n;
  }
  return id;
}

void PartitionSpec::iterate_cells(const std::function<void(CellIndex, const CellId&)>& visit) const {
  CellId id(dim());
  for (CellIndex ord = 0; ord < total_; ++ord) {
    visit(ord, id);
    for (std::size_t d = dim(); d-- > 0;) {
      if (++id[d] < counts_[d]) break;
      id[d] = 0;
    }
  }
}

}  // namespace gridshield
