// SPDX-License-Identifier: Apache-2.0

#include "dkps/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

#include "dkps/csv.hpp"
#include "dkps/numeric.hpp"

namespace dkps {

MeanEmbeddingMatrix mean_embeddings(const SubsetView& view, const ModelId& model) {
  const BenchmarkDataset& ds = view.base();
  const int mi = ds.model_index(model);
  if (!view.contains_model(model))
    throw InvalidArgument("model '" + model + "' not in view");
  if (view.query_count() == 0) throw InvalidArgument("empty query subset");
  const int m = view.query_count();
  const int p = ds.embedding_dim();
  MeanEmbeddingMatrix out;
  out.model = model;
  out.rows.setZero(m, p);
  const int r = ds.replicate_count();
  for (int row = 0; row < m; ++row) {
    const int qi = view.query_indices()[static_cast<std::size_t>(row)];
    if (ds.pair_replicates(mi, qi) != r || r == 0)
      throw InvalidArgument("missing replicate data for (model=" + model + ", query=" +
                            ds.queries()[static_cast<std::size_t>(qi)] + ")");
    for (int k = 0; k < r; ++k) {
      const auto vec = ds.embedding(mi, qi, k);
      for (int c = 0; c < p; ++c) out.rows(row, c) += vec[static_cast<std::size_t>(c)];
    }
    out.rows.row(row) /= static_cast<double>(r);
  }
  return out;
}

Eigen::MatrixXd distance_matrix(const std::vector<MeanEmbeddingMatrix>& means) {
  const int n = static_cast<int>(means.size());
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  if (n == 0) return D;
  const Eigen::Index rows = means[0].rows.rows();
  const Eigen::Index cols = means[0].rows.cols();
  for (const auto& m : means)
    if (m.rows.rows() != rows || m.rows.cols() != cols)
      throw InvalidArgument("mean-embedding shape mismatch for model '" + m.model + "'");

  // Flatten to points in R^(m*p); the Frobenius norm of the matrix
  // difference equals the Euclidean norm of the flattened difference.
  Eigen::MatrixXd flat(n, rows * cols);
  for (int i = 0; i < n; ++i) {
    Eigen::Map<const Eigen::VectorXd> v(means[static_cast<std::size_t>(i)].rows.data(),
                                        rows * cols);
    flat.row(i) = v.transpose();
  }
  const Eigen::VectorXd sq = flat.rowwise().squaredNorm();
  const Eigen::MatrixXd gram = flat * flat.transpose();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double d2 = sq(i) + sq(j) - 2.0 * gram(i, j);
      const double d = d2 > 0.0 ? std::sqrt(d2) : 0.0;
      D(i, j) = d;
      D(j, i) = d;
    }
  }
  return D;
}

MdsResult classical_mds(const Eigen::MatrixXd& distances, int dim) {
  const Eigen::Index n = distances.rows();
  if (distances.cols() != n) throw InvalidArgument("distance matrix must be square");
  if (dim < 1) throw InvalidArgument("MDS dimension must be >= 1");
  if (dim > n)
    throw InvalidArgument("MDS dimension " + std::to_string(dim) + " exceeds point count " +
                          std::to_string(n));
  if (!distances.allFinite()) throw InvalidArgument("distance matrix has non-finite entries");

  // Double centering: B = -1/2 J (D∘D) J with J = I - (1/n) 11^T.
  Eigen::MatrixXd B = -0.5 * distances.array().square().matrix();
  const Eigen::VectorXd row_mean = B.rowwise().mean();
  const double total_mean = row_mean.mean();
  B.colwise() -= row_mean;
  B.rowwise() -= row_mean.transpose();
  B.array() += total_mean;
  B = 0.5 * (B + B.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(B);
  if (solver.info() != Eigen::Success)
    throw Error("MDS eigendecomposition failed to converge");

  MdsResult result;
  result.eigenvalues.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) result.eigenvalues(i) = solver.eigenvalues()(n - 1 - i);

  const double scale = result.eigenvalues.size() == 0
                           ? 0.0
                           : std::max(std::abs(result.eigenvalues(0)),
                                      std::abs(result.eigenvalues(n - 1)));
  const double zero_tol = 1e-10 * scale;

  result.coordinates.setZero(n, dim);
  for (int d = 0; d < dim; ++d) {
    double lambda = result.eigenvalues(d);
    if (std::abs(lambda) <= zero_tol) lambda = 0.0;
    if (lambda < 0.0) {
      ++result.clamped_negative;
      lambda = 0.0;
    }
    if (lambda == 0.0) continue;  // padded with zeros
    Eigen::VectorXd v = solver.eigenvectors().col(n - 1 - d);
    // Deterministic sign: first largest-magnitude entry nonnegative.
    Eigen::Index best = 0;
    double best_mag = std::abs(v(0));
    for (Eigen::Index i = 1; i < n; ++i) {
      const double mag = std::abs(v(i));
      if (mag > best_mag) {
        best_mag = mag;
        best = i;
      }
    }
    if (v(best) < 0.0) v = -v;
    result.coordinates.col(d) = v * std::sqrt(lambda);
  }
  return result;
}

int PerspectiveSpace::index_of(const ModelId& id) const {
  for (std::size_t i = 0; i < model_ids.size(); ++i)
    if (model_ids[i] == id) return static_cast<int>(i);
  throw InvalidArgument("model '" + id + "' not in perspective space");
}

Eigen::RowVectorXd PerspectiveSpace::coords(const ModelId& id) const {
  return coordinates.row(index_of(id));
}

Eigen::MatrixXd PerspectiveSpace::reference_coordinates() const {
  int count = 0;
  for (bool t : is_target)
    if (!t) ++count;
  Eigen::MatrixXd out(count, coordinates.cols());
  int row = 0;
  for (std::size_t i = 0; i < is_target.size(); ++i)
    if (!is_target[i]) out.row(row++) = coordinates.row(static_cast<Eigen::Index>(i));
  return out;
}

PerspectiveSpace build_dkps(const SubsetView& view, std::span<const ModelId> references,
                            std::span<const ModelId> targets, int dim) {
  std::set<ModelId> seen;
  std::vector<ModelId> ordered;
  std::vector<bool> target_flags;
  for (const ModelId& id : references) {
    if (!seen.insert(id).second)
      throw InvalidArgument("model '" + id + "' listed twice in build_dkps");
    ordered.push_back(id);
    target_flags.push_back(false);
  }
  for (const ModelId& id : targets) {
    if (!seen.insert(id).second)
      throw InvalidArgument("model '" + id + "' listed twice in build_dkps");
    ordered.push_back(id);
    target_flags.push_back(true);
  }
  if (ordered.empty()) throw InvalidArgument("build_dkps: no models given");
  if (dim > static_cast<int>(ordered.size()))
    throw InvalidArgument("build_dkps: dimension " + std::to_string(dim) +
                          " exceeds model count " + std::to_string(ordered.size()));

  std::vector<MeanEmbeddingMatrix> means;
  means.reserve(ordered.size());
  for (const ModelId& id : ordered) means.push_back(mean_embeddings(view, id));

  const Eigen::MatrixXd D = distance_matrix(means);
  MdsResult mds = classical_mds(D, dim);

  PerspectiveSpace space;
  space.dimension = dim;
  space.model_ids = std::move(ordered);
  space.is_target = std::move(target_flags);
  space.coordinates = std::move(mds.coordinates);
  space.eigenvalues = std::move(mds.eigenvalues);
  space.clamped_negative = mds.clamped_negative;
  return space;
}

Eigen::MatrixXd procrustes_align(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target) {
  if (source.rows() != target.rows() || source.cols() != target.cols())
    throw InvalidArgument("procrustes_align: shape mismatch");
  const Eigen::RowVectorXd src_mean = source.colwise().mean();
  const Eigen::RowVectorXd tgt_mean = target.colwise().mean();
  const Eigen::MatrixXd src_c = source.rowwise() - src_mean;
  const Eigen::MatrixXd tgt_c = target.rowwise() - tgt_mean;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(src_c.transpose() * tgt_c,
                                        Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXd rotation = svd.matrixU() * svd.matrixV().transpose();
  return ((src_c * rotation).rowwise() + tgt_mean).eval();
}

void write_perspectives_csv(std::ostream& out, const PerspectiveSpace& space,
                            const BenchmarkDataset& dataset) {
  out << "# schema: dkps.perspectives.v1\n";
  out << "model_id,family_id";
  for (int d = 1; d <= space.dimension; ++d) out << ",psi_" << d;
  out << ",is_target\n";
  for (std::size_t i = 0; i < space.model_ids.size(); ++i) {
    const ModelId& id = space.model_ids[i];
    const int mi = dataset.model_index(id);
    out << csv_escape(id) << ','
        << csv_escape(dataset.models()[static_cast<std::size_t>(mi)].family);
    for (int d = 0; d < space.dimension; ++d)
      out << ',' << format_double(space.coordinates(static_cast<Eigen::Index>(i), d));
    out << ',' << (space.is_target[i] ? 1 : 0) << '\n';
  }
}

}  // namespace dkps
