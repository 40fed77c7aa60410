#pragma once

#include <string>
#include <vector>

#include "ragmi/mi_core.hpp"

namespace ragmi {

using Matrix = std::vector<std::vector<double>>;

struct MdsResult {
  Matrix coords;                     // m x dims
  std::vector<double> eigenvalues;   // descending, all of them
  std::size_t dropped_negative = 0;  // negative eigenvalues among the requested dims
  std::vector<std::string> warnings;
};

struct SpectrumEmbedding {
  std::vector<std::string> names;
  Matrix distance;
  Matrix interaction;  // raw II[i][j] = I(Y;X_i) - I(Y;X_i|X_j), diagonal 0
  Matrix coords;
  std::vector<double> eigenvalues;
  std::vector<int> clusters;
  std::vector<std::string> warnings;
};

/// D[i][j] = exp(-(II_ij + II_ji) / 2) off the diagonal, 0 on it. When
/// `interaction` is non-null it receives the raw asymmetric II matrix.
Matrix distance_matrix(const Utility& f, Matrix* interaction = nullptr);

/// Classical (Torgerson) MDS with a deterministic sign per axis: the first
/// coordinate with magnitude above 1e-12 is positive.
MdsResult classical_mds(const Matrix& d, std::size_t dims = 2);

/// Single-linkage groups: i and j share a group when a chain of pairs with
/// D < threshold connects them. Ids are numbered by first member.
std::vector<int> cluster(const Matrix& d, double threshold);

SpectrumEmbedding build_spectrum(const Utility& f, double threshold = 0.7);

std::string spectrum_csv(const SpectrumEmbedding& s);
std::string spectrum_svg(const SpectrumEmbedding& s);

}  // namespace ragmi
