#include <cmath>

#include "lkb/error.hpp"
#include "lkb/graph.hpp"
#include "lkb/policy.hpp"

namespace lkb {

// Kernels below use plain index loops so a graph design with a block-diagonal
// inverse reproduces the per-user arithmetic bit for bit: off-block entries
// stay exactly zero and contribute exact zeros to every sum.

LinUcbPolicy::LinUcbPolicy(std::string name, LinearDesign design, Eigen::MatrixXd pool,
                           int users, double alpha,
                           std::optional<Eigen::MatrixXd> regularizer)
    : name_(std::move(name)),
      design_(design),
      pool_(std::move(pool)),
      users_(users),
      dim_(static_cast<int>(pool_.cols())),
      alpha_(alpha) {
  if (users_ < 1) throw ParameterError("need at least one user");
  if (pool_.rows() < 1 || dim_ < 1) throw ParameterError("empty context pool");
  switch (design_) {
    case LinearDesign::per_user:
      blocks_.assign(static_cast<std::size_t>(users_),
                     Block{Eigen::MatrixXd::Identity(dim_, dim_), Eigen::VectorXd::Zero(dim_)});
      break;
    case LinearDesign::pooled:
      blocks_.assign(1, Block{Eigen::MatrixXd::Identity(dim_, dim_), Eigen::VectorXd::Zero(dim_)});
      break;
    case LinearDesign::graph: {
      if (!regularizer) throw ParameterError("graph design needs a regularizer");
      if (regularizer->rows() != users_ || regularizer->cols() != users_) {
        throw ParameterError("regularizer must be users x users");
      }
      const long total = static_cast<long>(users_) * dim_;
      if (total > kMaxGraphDimension) {
        throw ParameterError("graph design dimension " + std::to_string(total) +
                             " exceeds " + std::to_string(kMaxGraphDimension));
      }
      const Eigen::LLT<Eigen::MatrixXd> llt(*regularizer);
      if (llt.info() != Eigen::Success) throw NumericalError("regularizer is not positive definite");
      const Eigen::MatrixXd a_inv =
          llt.solve(Eigen::MatrixXd::Identity(users_, users_));
      blocks_.assign(1, Block{kronecker(a_inv, Eigen::MatrixXd::Identity(dim_, dim_)),
                              Eigen::VectorXd::Zero(total)});
      break;
    }
  }
  v_.resize(blocks_.front().b.size());
}

const Eigen::MatrixXd& LinUcbPolicy::inverse(int block) const {
  return blocks_.at(static_cast<std::size_t>(block)).inverse;
}

LinUcbPolicy::Block& LinUcbPolicy::block_for(int user) {
  if (user < 0 || user >= users_) throw ParameterError("user index out of range");
  return design_ == LinearDesign::per_user ? blocks_[static_cast<std::size_t>(user)]
                                           : blocks_.front();
}

int LinUcbPolicy::offset_for(int user) const {
  return design_ == LinearDesign::graph ? user * dim_ : 0;
}

void LinUcbPolicy::project(const Block& blk, int offset, int arm, Eigen::VectorXd& v) const {
  const Eigen::Index rows = blk.inverse.rows();
  for (Eigen::Index i = 0; i < rows; ++i) {
    double s = 0.0;
    for (int k = 0; k < dim_; ++k) s += blk.inverse(i, offset + k) * pool_(arm, k);
    v(i) = s;
  }
}

std::size_t LinUcbPolicy::select(const RoundView& round) {
  if (round.candidates.empty()) throw ProtocolError("empty candidate set");
  const Block& blk = block_for(round.user);
  const int offset = offset_for(round.user);
  std::vector<double> scores;
  scores.reserve(round.candidates.size());
  for (const int arm : round.candidates) {
    if (arm < 0 || arm >= pool_.rows()) throw ProtocolError("candidate outside the pool");
    project(blk, offset, arm, v_);
    double width2 = 0.0;
    for (int k = 0; k < dim_; ++k) width2 += pool_(arm, k) * v_(offset + k);
    double mean = 0.0;
    for (Eigen::Index i = 0; i < v_.size(); ++i) mean += v_(i) * blk.b(i);
    scores.push_back(mean + alpha_ * std::sqrt(std::max(width2, 0.0)));
  }
  return argmax_lowest(scores);
}

void LinUcbPolicy::learn(const RoundView& round, std::size_t chosen, double reward) {
  if (chosen >= round.candidates.size()) throw ProtocolError("chosen position outside candidates");
  if (!std::isfinite(reward)) throw ValidationError("reward must be finite");
  Block& blk = block_for(round.user);
  const int offset = offset_for(round.user);
  const int arm = round.candidates[chosen];
  project(blk, offset, arm, v_);
  double width2 = 0.0;
  for (int k = 0; k < dim_; ++k) width2 += pool_(arm, k) * v_(offset + k);
  const double denom = 1.0 + width2;
  const Eigen::Index n = blk.inverse.rows();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double vj = v_(j) / denom;
    for (Eigen::Index i = 0; i < n; ++i) blk.inverse(i, j) -= v_(i) * vj;
  }
  for (int k = 0; k < dim_; ++k) blk.b(offset + k) += reward * pool_(arm, k);
}

}  // namespace lkb
