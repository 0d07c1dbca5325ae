#include "caire/evalkit/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "caire/errors.hpp"
#include "caire/seqcore/cohort_io.hpp"
#include "caire/simsynth/motif.hpp"

namespace caire::evalkit {

namespace {

std::vector<double> normalised(std::vector<double> v) {
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  for (double& x : v) x /= total;
  return v;
}

void same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ShapeError(std::string(what) + ": inputs differ in length");
}

}  // namespace

TinyWorld random_tiny_world(std::size_t size, seqcore::Rng& rng) {
  if (size == 0) throw Error("TinyWorld needs at least one element");
  TinyWorld w;
  for (std::size_t i = 0; i < size; ++i) {
    w.q_z.push_back(-std::log(1.0 - rng.uniform()));  // Exp(1) draws normalise to Dirichlet(1)
    w.r.push_back(std::exp(rng.normal()));
  }
  w.q_z = normalised(std::move(w.q_z));
  w.q_a = oracle_select(w.q_z, w.r);
  return w;
}

std::vector<double> oracle_select(std::span<const double> q_z, std::span<const double> r) {
  same_size(q_z.size(), r.size(), "oracle_select");
  std::vector<double> q_a(q_z.size());
  for (std::size_t i = 0; i < q_z.size(); ++i) q_a[i] = r[i] * q_z[i];
  return normalised(std::move(q_a));
}

std::vector<double> oracle_fitness(std::span<const double> q_z, std::span<const double> q_a, std::size_t x0) {
  same_size(q_z.size(), q_a.size(), "oracle_fitness");
  if (x0 >= q_z.size()) throw Error("reference element out of range");
  if (q_z[x0] == 0.0 || q_a[x0] == 0.0) throw Error("reference element has zero probability");
  const double ref = q_a[x0] / q_z[x0];
  std::vector<double> r(q_z.size(), 0.0);
  for (std::size_t i = 0; i < q_z.size(); ++i) {
    if (q_z[i] == 0.0) {
      if (q_a[i] > 0.0) throw Error("q_a has mass where q_z has none");
      continue;
    }
    r[i] = (q_a[i] / q_z[i]) / ref;
  }
  return r;
}

std::vector<double> oracle_reverse(std::span<const double> q_a_star, std::span<const double> r) {
  same_size(q_a_star.size(), r.size(), "oracle_reverse");
  std::vector<double> q(q_a_star.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!(r[i] > 0.0)) throw Error("fitness must be positive to reverse selection");
    q[i] = q_a_star[i] / r[i];
  }
  return normalised(std::move(q));
}

double pr_auc(std::span<const double> scores, std::span<const int> labels) {
  same_size(scores.size(), labels.size(), "pr_auc");
  const std::size_t n = scores.size();
  const auto n_pos = static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; }));
  if (n_pos == 0 || n_pos == n) throw Error("pr_auc needs both positive and negative labels");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double area = 0.0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t k = 0; k < n;) {
    const double s = scores[order[k]];
    const std::size_t tp_before = tp;
    while (k < n && scores[order[k]] == s) {
      tp += labels[order[k]] != 0;
      ++seen;
      ++k;
    }
    if (tp > tp_before)
      area += (static_cast<double>(tp - tp_before) / static_cast<double>(n_pos)) *
              (static_cast<double>(tp) / static_cast<double>(seen));
  }
  return area;
}

AucResult roc_auc_unlabeled(std::span<const double> scores_pos, std::span<const double> scores_unlabeled) {
  const std::size_t b = scores_pos.size(), u = scores_unlabeled.size();
  if (b == 0 || u == 0) throw Error("roc_auc_unlabeled needs both groups nonempty");
  // Rank-sum form: sort everything, give tied blocks their average rank.
  std::vector<std::pair<double, int>> all;
  all.reserve(b + u);
  for (double s : scores_pos) all.emplace_back(s, 1);
  for (double s : scores_unlabeled) all.emplace_back(s, 0);
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
  double rank_sum = 0.0;
  for (std::size_t k = 0; k < all.size();) {
    std::size_t end = k;
    std::size_t pos_in_block = 0;
    while (end < all.size() && all[end].first == all[k].first) pos_in_block += all[end++].second;
    const double avg_rank = 0.5 * static_cast<double>(k + 1 + end);
    rank_sum += avg_rank * static_cast<double>(pos_in_block);
    k = end;
  }
  const double bd = static_cast<double>(b), ud = static_cast<double>(u);
  AucResult res;
  res.auc = (rank_sum - bd * (bd + 1.0) / 2.0) / (bd * ud);
  res.std_error = 1.0 / (2.0 * std::sqrt(static_cast<double>(std::min(b, u))));
  res.n_pos = b;
  res.n_unlabeled = u;
  return res;
}

double welch_t(std::span<const double> a, std::span<const double> b) {
  auto moments = [](std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss / (n - 1.0)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double se2 = va / static_cast<double>(a.size()) + vb / static_cast<double>(b.size());
  if (se2 == 0.0) return ma == mb ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), ma - mb);
  return (ma - mb) / std::sqrt(se2);
}

double permutation_ttest(std::span<const double> group_a, std::span<const double> group_b, std::size_t n_perm,
                         seqcore::Rng& rng) {
  if (group_a.size() < 2 || group_b.size() < 2) throw Error("permutation t-test needs 2 or more values per group");
  if (n_perm == 0) throw Error("permutation t-test needs at least one permutation");
  const double observed = std::abs(welch_t(group_a, group_b));
  std::vector<double> pooled(group_a.begin(), group_a.end());
  pooled.insert(pooled.end(), group_b.begin(), group_b.end());
  const std::size_t na = group_a.size();
  std::size_t extreme = 0;
  for (std::size_t p = 0; p < n_perm; ++p) {
    for (std::size_t k = pooled.size(); k > 1; --k) std::swap(pooled[k - 1], pooled[rng.index(k)]);
    const std::span<const double> all(pooled);
    if (std::abs(welch_t(all.first(na), all.subspan(na))) >= observed) ++extreme;
  }
  return static_cast<double>(extreme + 1) / static_cast<double>(n_perm + 1);
}

MotifPrAuc per_patient_motif_prauc(std::span<const seqcore::Repertoire* const> heldout,
                                   const simsynth::GroundTruth& truth, const SequenceScorer& scorer) {
  MotifPrAuc out;
  for (const seqcore::Repertoire* rep : heldout) {
    const auto* pt = truth.find(rep->patient_id());
    if (!pt) throw Error("patient " + rep->patient_id() + " is missing from the ground truth");
    if (!pt->zeta) continue;
    const auto labels = simsynth::causal_labels(*rep, truth);
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) {
      out.warnings.push_back("patient " + rep->patient_id() + " skipped: causal motif labels are all " +
                             (pos == 0 ? "negative" : "positive"));
      continue;
    }
    std::vector<double> scores(labels.size());
    for (std::size_t j = 0; j < labels.size(); ++j) scores[j] = scorer(rep->mature(), j);
    out.patients.push_back(rep->patient_id());
    out.per_patient.push_back(pr_auc(scores, labels));
  }
  if (out.per_patient.empty()) throw Error("no held-out patient carries the causal motif");
  const double n = static_cast<double>(out.per_patient.size());
  out.mean = std::accumulate(out.per_patient.begin(), out.per_patient.end(), 0.0) / n;
  if (out.per_patient.size() > 1) {
    double ss = 0.0;
    for (double v : out.per_patient) ss += (v - out.mean) * (v - out.mean);
    out.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

MotifPrAuc per_patient_motif_prauc(std::span<const seqcore::Repertoire* const> heldout,
                                   const simsynth::GroundTruth& truth, const effects::EffectModel& model,
                                   double epsilon) {
  return per_patient_motif_prauc(heldout, truth, [&](const seqcore::WeightedSet& set, std::size_t j) {
    return model.ate(set.tokens()[j], epsilon);
  });
}

void write_metrics_csv(std::span<const MetricRow> rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "metric,value,stderr,n\n";
  for (const auto& r : rows)
    out << r.metric << ',' << seqcore::format_double(r.value) << ',' << seqcore::format_double(r.std_error) << ','
        << r.n << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace caire::evalkit
