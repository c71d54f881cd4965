// SPDX-License-Identifier: Apache-2.0

#include "dkps/irt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>

#include "dkps/csv.hpp"
#include "dkps/numeric.hpp"

namespace dkps {

namespace {

inline double log_sigmoid(double eta) {
  return eta >= 0.0 ? -std::log1p(std::exp(-eta)) : eta - std::log1p(std::exp(eta));
}

inline double bernoulli_ll(int x, double eta) {
  return x == 1 ? log_sigmoid(eta) : log_sigmoid(-eta);
}

// Damped Newton step for a 1-D concave coordinate: halve until the
// coordinate log-likelihood does not decrease.
double damped_step(double current, double gradient, double information,
                   const std::function<double(double)>& coordinate_ll) {
  if (information <= 0.0) return current;
  double step = gradient / information;
  if (!std::isfinite(step)) return current;
  const double base_ll = coordinate_ll(current);
  for (int h = 0; h < 60; ++h) {
    const double candidate = current + step;
    if (std::isfinite(candidate) && coordinate_ll(candidate) >= base_ll) return candidate;
    step *= 0.5;
  }
  return current;
}

}  // namespace

RaschItemBank fit_difficulties(const Eigen::MatrixXi& correctness,
                               const std::vector<QueryId>& query_ids,
                               const RaschFitOptions& options) {
  const Eigen::Index n = correctness.rows();
  const Eigen::Index M = correctness.cols();
  if (n < 1 || M < 1) throw InvalidArgument("fit_difficulties: empty correctness matrix");
  if (static_cast<Eigen::Index>(query_ids.size()) != M)
    throw InvalidArgument("fit_difficulties: query id count does not match columns");
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < M; ++j)
      if (correctness(i, j) != 0 && correctness(i, j) != 1)
        throw InvalidArgument("fit_difficulties: entries must be 0 or 1");

  RaschItemBank bank;
  bank.queries = query_ids;
  bank.difficulties.setZero(M);

  // Items with a constant column have no finite MLE; clamp and exclude.
  std::vector<Eigen::Index> fitted_items;
  for (Eigen::Index j = 0; j < M; ++j) {
    const int sum = correctness.col(j).sum();
    if (sum == n) {
      bank.difficulties(j) = -options.clamp;
      bank.warnings.push_back("item '" + query_ids[static_cast<std::size_t>(j)] +
                              "' answered correctly by every model; difficulty clamped to " +
                              format_double(-options.clamp));
    } else if (sum == 0) {
      bank.difficulties(j) = options.clamp;
      bank.warnings.push_back("item '" + query_ids[static_cast<std::size_t>(j)] +
                              "' answered incorrectly by every model; difficulty clamped to " +
                              format_double(options.clamp));
    } else {
      fitted_items.push_back(j);
    }
  }

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
  std::vector<bool> theta_pinned(static_cast<std::size_t>(n), false);
  if (!fitted_items.empty()) {
    for (Eigen::Index i = 0; i < n; ++i) {
      int sum = 0;
      for (Eigen::Index j : fitted_items) sum += correctness(i, j);
      if (sum == static_cast<int>(fitted_items.size())) {
        theta(i) = options.clamp;
        theta_pinned[static_cast<std::size_t>(i)] = true;
      } else if (sum == 0) {
        theta(i) = -options.clamp;
        theta_pinned[static_cast<std::size_t>(i)] = true;
      }
    }
  }

  std::vector<double> ll_terms;
  ll_terms.reserve(static_cast<std::size_t>(n) * fitted_items.size());
  auto sweep_ll = [&]() {
    ll_terms.clear();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j : fitted_items)
        ll_terms.push_back(bernoulli_ll(correctness(i, j), theta(i) - bank.difficulties(j)));
    return ll_terms.empty() ? 0.0 : pairwise_sum(ll_terms);
  };

  if (!fitted_items.empty()) {
    for (int sweep = 0; sweep < options.max_iterations; ++sweep) {
      double max_change = 0.0;

      for (Eigen::Index i = 0; i < n; ++i) {
        if (theta_pinned[static_cast<std::size_t>(i)]) continue;
        double grad = 0.0, info = 0.0;
        for (Eigen::Index j : fitted_items) {
          const double p = rasch_probability(theta(i), bank.difficulties(j));
          grad += correctness(i, j) - p;
          info += p * (1.0 - p);
        }
        auto row_ll = [&](double t) {
          double acc = 0.0;
          for (Eigen::Index j : fitted_items)
            acc += bernoulli_ll(correctness(i, j), t - bank.difficulties(j));
          return acc;
        };
        const double updated = damped_step(theta(i), grad, info, row_ll);
        max_change = std::max(max_change, std::abs(updated - theta(i)));
        theta(i) = updated;
      }

      for (Eigen::Index j : fitted_items) {
        double grad = 0.0, info = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double p = rasch_probability(theta(i), bank.difficulties(j));
          grad += p - correctness(i, j);
          info += p * (1.0 - p);
        }
        auto col_ll = [&](double b) {
          double acc = 0.0;
          for (Eigen::Index i = 0; i < n; ++i)
            acc += bernoulli_ll(correctness(i, j), theta(i) - b);
          return acc;
        };
        const double updated = damped_step(bank.difficulties(j), grad, info, col_ll);
        max_change = std::max(max_change, std::abs(updated - bank.difficulties(j)));
        bank.difficulties(j) = updated;
      }

      // Identifiability: mean fitted difficulty zero; the joint shift keeps
      // the likelihood unchanged.
      double center = 0.0;
      for (Eigen::Index j : fitted_items) center += bank.difficulties(j);
      center /= static_cast<double>(fitted_items.size());
      for (Eigen::Index j : fitted_items) bank.difficulties(j) -= center;
      theta.array() -= center;

      bank.ll_trace.push_back(sweep_ll());
      bank.iterations = sweep + 1;
      if (max_change < options.tolerance) break;
    }
  }

  // Final joint log-likelihood over all items, clamped ones included.
  std::vector<double> final_terms;
  final_terms.reserve(static_cast<std::size_t>(n * M));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < M; ++j)
      final_terms.push_back(bernoulli_ll(correctness(i, j), theta(i) - bank.difficulties(j)));
  bank.log_likelihood = pairwise_sum(final_terms);
  return bank;
}

AbilityEstimate fit_ability(std::span<const int> correctness,
                            std::span<const double> difficulties,
                            const RaschFitOptions& options) {
  if (correctness.empty()) throw InvalidArgument("fit_ability: empty query subset");
  if (correctness.size() != difficulties.size())
    throw InvalidArgument("fit_ability: difficulty missing for some query");
  int sum = 0;
  for (int x : correctness) {
    if (x != 0 && x != 1) throw InvalidArgument("fit_ability: entries must be 0 or 1");
    sum += x;
  }

  AbilityEstimate est;
  const auto info_at = [&](double t) {
    double info = 0.0;
    for (double b : difficulties) {
      const double p = rasch_probability(t, b);
      info += p * (1.0 - p);
    }
    return info;
  };

  if (sum == static_cast<int>(correctness.size()) || sum == 0) {
    est.theta = sum == 0 ? -options.clamp : options.clamp;
    est.clamped = true;
    est.warning = std::string("target answered every sampled query ") +
                  (sum == 0 ? "incorrectly" : "correctly") + "; ability clamped to " +
                  format_double(est.theta);
    const double info = info_at(est.theta);
    est.standard_error = info > 0.0 ? 1.0 / std::sqrt(info) : std::numeric_limits<double>::infinity();
    return est;
  }

  auto ll = [&](double t) {
    double acc = 0.0;
    for (std::size_t j = 0; j < correctness.size(); ++j)
      acc += bernoulli_ll(correctness[j], t - difficulties[j]);
    return acc;
  };

  double theta = 0.0;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    double grad = 0.0, info = 0.0;
    for (std::size_t j = 0; j < correctness.size(); ++j) {
      const double p = rasch_probability(theta, difficulties[j]);
      grad += correctness[j] - p;
      info += p * (1.0 - p);
    }
    const double updated = damped_step(theta, grad, info, ll);
    const double change = std::abs(updated - theta);
    theta = updated;
    if (change < options.tolerance) break;
  }
  est.theta = theta;
  const double info = info_at(theta);
  est.standard_error = info > 0.0 ? 1.0 / std::sqrt(info) : std::numeric_limits<double>::infinity();
  return est;
}

double irt_predict_score(double theta, const RaschItemBank& bank) {
  if (bank.difficulties.size() == 0) throw InvalidArgument("irt_predict_score: empty item bank");
  std::vector<double> probs(static_cast<std::size_t>(bank.difficulties.size()));
  for (Eigen::Index j = 0; j < bank.difficulties.size(); ++j)
    probs[static_cast<std::size_t>(j)] = rasch_probability(theta, bank.difficulties(j));
  return clip01(stable_mean(probs));
}

void save_item_bank(const std::filesystem::path& path, const RaschItemBank& bank) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write " + path.string());
  out << "# schema: dkps.item_bank.v1\n";
  out << "query_id,difficulty\n";
  for (std::size_t j = 0; j < bank.queries.size(); ++j)
    out << csv_escape(bank.queries[j]) << ','
        << format_double(bank.difficulties(static_cast<Eigen::Index>(j))) << '\n';
}

RaschItemBank load_item_bank(const std::filesystem::path& path) {
  CsvFile csv = read_csv_file(path, {"query_id", "difficulty"});
  RaschItemBank bank;
  bank.difficulties.resize(static_cast<Eigen::Index>(csv.rows.size()));
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    bank.queries.push_back(csv.rows[i][0]);
    bank.difficulties(static_cast<Eigen::Index>(i)) =
        parse_double(csv.rows[i][1], path.filename().string() + ":" +
                                         std::to_string(csv.row_lines[i]));
  }
  return bank;
}

}  // namespace dkps
