#include "ragmi/spectrum.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "ragmi/error.hpp"
#include "ragmi/report.hpp"

namespace ragmi {

Matrix distance_matrix(const Utility& f, Matrix* interaction) {
  const std::size_t m = f.size();
  if (m < 2) throw ArgumentError("distance_matrix: need at least two retrievers");
  std::vector<SubsetMask> masks;
  for (std::size_t i = 0; i < m; ++i) {
    masks.push_back(SubsetMask{1} << i);
    for (std::size_t j = i + 1; j < m; ++j) masks.push_back((SubsetMask{1} << i) | (SubsetMask{1} << j));
  }
  f.precompute(masks);

  Matrix ii(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (i != j) ii[i][j] = interaction_information(f, i, j);
  Matrix d(m, std::vector<double>(m, 0.0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) d[i][j] = d[j][i] = distance(0.5 * (ii[i][j] + ii[j][i]));
  if (interaction) *interaction = std::move(ii);
  return d;
}

MdsResult classical_mds(const Matrix& d, std::size_t dims) {
  const std::size_t m = d.size();
  if (m == 0) throw ArgumentError("classical_mds: empty distance matrix");
  if (dims == 0) throw ArgumentError("classical_mds: dims must be >= 1");
  for (std::size_t i = 0; i < m; ++i) {
    if (d[i].size() != m) throw ArgumentError("classical_mds: matrix is not square");
    if (d[i][i] != 0.0) throw ArgumentError("classical_mds: diagonal must be zero");
    for (std::size_t j = 0; j < m; ++j) {
      if (!std::isfinite(d[i][j]) || d[i][j] < 0.0)
        throw ArgumentError("classical_mds: distances must be finite and nonnegative");
      if (std::fabs(d[i][j] - d[j][i]) > 1e-9) throw ArgumentError("classical_mds: matrix is not symmetric");
    }
  }
  MdsResult out;
  if (m < 3) out.warnings.push_back("fewer than three points; embedding is at most one-dimensional");

  Eigen::MatrixXd d2(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const double v = 0.5 * (d[i][j] + d[j][i]);
      d2(i, j) = v * v;
    }
  const Eigen::MatrixXd j =
      Eigen::MatrixXd::Identity(m, m) - Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m));
  Eigen::MatrixXd b = -0.5 * j * d2 * j;
  b = 0.5 * (b + b.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b);
  if (es.info() != Eigen::Success) throw ConvergenceError("classical_mds: eigendecomposition failed");

  // Eigen returns ascending eigenvalues.
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::reverse(order.begin(), order.end());
  for (std::size_t k : order) out.eigenvalues.push_back(es.eigenvalues()(static_cast<Eigen::Index>(k)));

  const double scale = std::max(1.0, std::fabs(out.eigenvalues.front()));
  out.coords.assign(m, std::vector<double>(dims, 0.0));
  for (std::size_t a = 0; a < dims && a < m; ++a) {
    const double lambda = out.eigenvalues[a];
    if (lambda < -1e-12 * scale) {
      ++out.dropped_negative;
      continue;
    }
    if (!(lambda > 1e-12 * scale)) continue;
    const auto vec = es.eigenvectors().col(static_cast<Eigen::Index>(order[a]));
    double sign = 1.0;
    for (std::size_t i = 0; i < m; ++i)
      if (std::fabs(vec(static_cast<Eigen::Index>(i))) > 1e-12) {
        sign = vec(static_cast<Eigen::Index>(i)) < 0 ? -1.0 : 1.0;
        break;
      }
    const double root = std::sqrt(lambda);
    for (std::size_t i = 0; i < m; ++i) out.coords[i][a] = sign * root * vec(static_cast<Eigen::Index>(i));
  }
  std::size_t negatives = 0;
  for (double e : out.eigenvalues)
    if (e < -1e-12 * scale) ++negatives;
  if (negatives > 0)
    out.warnings.push_back(std::to_string(negatives) +
                           " negative eigenvalue(s): distances are not exactly Euclidean");
  // Center exactly; the eigenvectors of a centered Gram matrix are only
  // orthogonal to 1 up to rounding.
  for (std::size_t a = 0; a < dims; ++a) {
    double mu = 0.0;
    for (const auto& row : out.coords) mu += row[a];
    mu /= static_cast<double>(m);
    for (auto& row : out.coords) row[a] -= mu;
  }
  return out;
}

std::vector<int> cluster(const Matrix& d, double threshold) {
  const std::size_t m = d.size();
  std::vector<std::size_t> parent(m);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j)
      if (d[i][j] < threshold) {
        const std::size_t a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
  std::vector<int> ids(m, -1), label(m, -1);
  int next = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t root = find(i);
    if (label[root] < 0) label[root] = next++;
    ids[i] = label[root];
  }
  return ids;
}

SpectrumEmbedding build_spectrum(const Utility& f, double threshold) {
  SpectrumEmbedding s;
  s.names = f.names();
  s.distance = distance_matrix(f, &s.interaction);
  MdsResult mds = classical_mds(s.distance, 2);
  s.coords = std::move(mds.coords);
  s.eigenvalues = std::move(mds.eigenvalues);
  s.warnings = std::move(mds.warnings);
  s.clusters = cluster(s.distance, threshold);
  return s;
}

std::string spectrum_csv(const SpectrumEmbedding& s) {
  std::ostringstream out;
  out << "name,x,y,cluster\n";
  for (std::size_t i = 0; i < s.names.size(); ++i)
    out << csv_field(s.names[i]) << ',' << format_number(s.coords[i][0]) << ','
        << format_number(s.coords[i][1]) << ',' << s.clusters[i] << '\n';
  return out.str();
}

std::string spectrum_svg(const SpectrumEmbedding& s) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                  "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};
  const double w = 640, h = 480, pad = 60;
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
  for (const auto& c : s.coords) {
    xmin = std::min(xmin, c[0]);
    xmax = std::max(xmax, c[0]);
    ymin = std::min(ymin, c[1]);
    ymax = std::max(ymax, c[1]);
  }
  const double xs = xmax > xmin ? (w - 2 * pad) / (xmax - xmin) : 1.0;
  const double ys = ymax > ymin ? (h - 2 * pad) / (ymax - ymin) : 1.0;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">Retriever redundancy spectrum (classical MDS)</text>\n";
  for (std::size_t i = 0; i < s.names.size(); ++i) {
    const double x = pad + (s.coords[i][0] - xmin) * xs;
    const double y = h - pad - (s.coords[i][1] - ymin) * ys;
    const char* color = palette[static_cast<std::size_t>(s.clusters[i]) % 10];
    out << "<circle cx=\"" << format_fixed(x, 2) << "\" cy=\"" << format_fixed(y, 2)
        << "\" r=\"5\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << format_fixed(x + 7, 2) << "\" y=\"" << format_fixed(y - 7, 2)
        << "\" font-family=\"sans-serif\" font-size=\"11\">" << xml_escape(s.names[i]) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace ragmi
