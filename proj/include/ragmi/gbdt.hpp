#pragma once

// Small histogram gradient-boosted tree ensemble used by the regression MI
// estimator. Features are quantile-binned on the training rows; trees are
// grown level-wise to a fixed depth with L2-regularized Newton leaf values.

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ragmi {

struct GbdtParams {
  int trees = 120;
  int depth = 3;
  double learning_rate = 0.1;
  int min_leaf = 20;
  double l2 = 1.0;
  int bins = 64;

  void validate() const;
};

enum class GbdtLoss { Squared, Logistic };

class Gbdt {
 public:
  /// Fits on the given rows of column-major `columns` with targets `y`
  /// (indexed by row). Logistic loss expects y in {0, 1}.
  static Gbdt fit(const std::vector<std::vector<double>>& columns, const std::vector<double>& y,
                  const std::vector<std::size_t>& rows, const GbdtParams& params, GbdtLoss loss);

  /// Raw additive score: the prediction for Squared, the log-odds for Logistic.
  double predict_raw(const std::vector<std::vector<double>>& columns, std::size_t row) const;

  std::size_t tree_count() const { return trees_.size(); }

 private:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    std::uint16_t bin = 0;  // rows with bin <= this go left
    int left = -1;
    int right = -1;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  std::uint16_t bin_of(std::size_t feature, double v) const;

  double base_ = 0.0;
  std::vector<std::vector<double>> edges_;  // per feature, ascending upper bin bounds
  std::vector<Tree> trees_;
};

}  // namespace ragmi
