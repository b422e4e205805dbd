#pragma once

#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "tke/rng.hpp"

namespace tke {

// Deterministic id → unit-vector dictionary. A vector depends only on
// (seed, kind, id), never on insertion order.
class Codebook {
 public:
  Codebook(int d, std::uint64_t seed, std::string kind)
      : d_(d), seed_(seed), kind_(std::move(kind)), vecs_(d, 0) {}

  int add(const std::string& id) {
    if (auto it = index_.find(id); it != index_.end()) return it->second;
    const int idx = int(ids_.size());
    if (vecs_.cols() == idx) {
      Eigen::MatrixXd grown(d_, std::max<Eigen::Index>(16, vecs_.cols() * 2));
      grown.leftCols(idx) = vecs_.leftCols(idx);
      vecs_ = std::move(grown);
    }
    vecs_.col(idx) = unit_vector(seed_, kind_, id, d_);
    ids_.push_back(id);
    index_.emplace(id, idx);
    return idx;
  }

  bool has(const std::string& id) const { return index_.count(id) > 0; }

  int index(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end())
      throw std::runtime_error("unknown " + kind_ + " id: " + id);
    return it->second;
  }

  Eigen::VectorXd vec(const std::string& id) const {
    return vecs_.col(index(id));
  }

  Eigen::VectorXd vec(int idx) const { return vecs_.col(idx); }

  const std::string& id(int idx) const { return ids_.at(idx); }

  int size() const { return int(ids_.size()); }

  const std::vector<std::string>& ids() const { return ids_; }

  // d × size matrix, one column per entry, in registration order.
  auto matrix() const { return vecs_.leftCols(size()); }

  int dimension() const { return d_; }

 private:
  int d_;
  std::uint64_t seed_;
  std::string kind_;
  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> index_;
  Eigen::MatrixXd vecs_;
};

}
