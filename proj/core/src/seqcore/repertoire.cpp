#include "caire/seqcore/repertoire.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "caire/errors.hpp"

namespace caire::seqcore {

WeightedSet::WeightedSet(std::vector<AminoSequence> sequences, std::vector<double> weights)
    : sequences_(std::move(sequences)), weights_(std::move(weights)) {
  if (sequences_.size() != weights_.size()) throw Error("sequence and weight counts differ");
  if (sequences_.empty()) return;
  double total = 0.0;
  for (double w : weights_) {
    if (!std::isfinite(w) || w < 0.0) throw Error("weights must be finite and nonnegative");
    total += w;
  }
  if (total <= 0.0) throw Error("weights sum to zero");
  cumulative_.resize(weights_.size());
  double run = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    weights_[i] /= total;
    run += weights_[i];
    cumulative_[i] = run;
  }
  tokens_.reserve(sequences_.size());
  for (const auto& s : sequences_) tokens_.push_back(tokenize(s));
}

WeightedSet::WeightedSet(std::vector<AminoSequence> sequences)
    : WeightedSet(std::vector<AminoSequence>(sequences), std::vector<double>(sequences.size(), 1.0)) {}

std::size_t WeightedSet::max_length() const noexcept {
  std::size_t m = 0;
  for (const auto& s : sequences_) m = std::max(m, s.length());
  return m;
}

std::size_t WeightedSet::draw(Rng& rng) const noexcept {
  // Scale by the realized total so rounding in the running sum cannot push
  // u past the last bucket.
  const double u = rng.uniform() * cumulative_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  const auto i = static_cast<std::size_t>(it - cumulative_.begin());
  return std::min(i, cumulative_.size() - 1);
}

Repertoire::Repertoire(std::string patient_id, WeightedSet mature, double outcome, WeightedSet preselection)
    : patient_id_(std::move(patient_id)),
      mature_(std::move(mature)),
      outcome_(outcome),
      preselection_(std::move(preselection)) {
  if (mature_.empty()) throw Error("patient " + patient_id_ + " has no mature sequences");
}

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "?";
}

std::size_t CohortDataset::l_max() const noexcept {
  std::size_t m = 0;
  for (const auto& r : repertoires) m = std::max({m, r.mature().max_length(), r.preselection().max_length()});
  return m + 1;
}

std::vector<const Repertoire*> CohortDataset::subset(Split s) const {
  std::vector<const Repertoire*> out;
  for (const auto& r : repertoires) {
    const auto it = split_assignment.find(r.patient_id());
    if (it != split_assignment.end() && it->second == s) out.push_back(&r);
  }
  return out;
}

const Repertoire* CohortDataset::find(const std::string& patient_id) const noexcept {
  for (const auto& r : repertoires)
    if (r.patient_id() == patient_id) return &r;
  return nullptr;
}

std::vector<std::size_t> outcome_strata(std::span<const double> outcomes, std::size_t strata) {
  const std::size_t n = outcomes.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return outcomes[a] < outcomes[b]; });
  std::vector<std::size_t> bin(n, 0);
  if (strata == 0) return bin;
  for (std::size_t rank = 0; rank < n; ++rank) bin[order[rank]] = rank * strata / n;
  return bin;
}

std::vector<std::size_t> apportion(std::size_t total, std::span<const std::size_t> sizes) {
  const std::size_t n = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  std::vector<std::size_t> out(sizes.size(), 0);
  if (n == 0 || total == 0) return out;
  std::vector<std::pair<std::size_t, std::size_t>> remainders;  // (remainder numerator, group)
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    const std::size_t num = total * sizes[g];
    out[g] = num / n;
    assigned += out[g];
    remainders.emplace_back(num % n, g);
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < remainders.size(); ++k) {
    const std::size_t g = remainders[k].second;
    if (out[g] < sizes[g]) {
      ++out[g];
      ++assigned;
    }
  }
  return out;
}

std::map<std::string, Split> assign_splits(std::span<const Repertoire> repertoires, const SplitConfig& cfg) {
  if (cfg.val_fraction < 0 || cfg.test_fraction < 0 || cfg.val_fraction + cfg.test_fraction > 1.0)
    throw ConfigError("validation and test fractions must be nonnegative and sum to at most 1");
  const std::size_t n = repertoires.size();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = repertoires[i].outcome();
  const auto bin = outcome_strata(y, std::max<std::size_t>(cfg.strata, 1));
  const std::size_t n_strata = std::max<std::size_t>(cfg.strata, 1);

  Rng rng = Rng(cfg.seed).split(0x5e11);
  std::vector<std::vector<std::size_t>> members(n_strata);
  for (std::size_t i = 0; i < n; ++i) members[bin[i]].push_back(i);
  for (auto& m : members)
    for (std::size_t k = m.size(); k > 1; --k) std::swap(m[k - 1], m[rng.index(k)]);

  std::vector<std::size_t> sizes;
  for (const auto& m : members) sizes.push_back(m.size());
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(n) + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(cfg.test_fraction * static_cast<double>(n) + 1e-9));
  const auto val_counts = apportion(n_val, sizes);
  std::vector<std::size_t> left(n_strata);
  for (std::size_t s = 0; s < n_strata; ++s) left[s] = sizes[s] - val_counts[s];
  const auto test_counts = apportion(n_test, left);

  std::map<std::string, Split> out;
  for (std::size_t s = 0; s < n_strata; ++s) {
    for (std::size_t k = 0; k < members[s].size(); ++k) {
      Split sp = Split::kTrain;
      if (k < val_counts[s]) sp = Split::kValidation;
      else if (k < val_counts[s] + test_counts[s]) sp = Split::kTest;
      out[repertoires[members[s][k]].patient_id()] = sp;
    }
  }
  return out;
}

std::vector<std::size_t> sample_indices(const WeightedSet& set, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(k);
  for (auto& i : idx) i = set.draw(rng);
  return idx;
}

std::vector<AminoSequence> sample_minibatch(const Repertoire& rep, std::size_t k, Rng& rng) {
  if (k == 0) throw ConfigError("minibatch size must be at least 1");
  std::vector<AminoSequence> out;
  out.reserve(k);
  for (std::size_t i : sample_indices(rep.mature(), k, rng)) out.push_back(rep.mature().sequences()[i]);
  return out;
}

}  // namespace caire::seqcore
