#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace natadv {

struct MlpSpec {
  int input_dim = 1;
  std::vector<int> hidden;
  int output_dim = 1;

  void validate() const;
  std::size_t param_count() const;
  bool operator==(const MlpSpec&) const = default;
};

// Fully connected ReLU network. Batches are column-major: one sample per
// column. Parameters live in one flat vector, per layer W (out x in,
// column-major) followed by b.
class Mlp {
 public:
  struct Cache {
    std::uint64_t owner = 0;
    std::uint64_t generation = 0;
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer (post-activation)
    Eigen::MatrixXd output;
  };

  Mlp() = default;
  // He-normal weights, zero biases; the last layer's weights are scaled by output_gain.
  Mlp(MlpSpec spec, std::mt19937_64& rng, double output_gain = 1.0);

  const MlpSpec& spec() const { return spec_; }
  const Eigen::VectorXd& params() const { return params_; }
  // Mutable access invalidates previously produced caches.
  Eigen::VectorXd& mutable_params();
  void set_params(const Eigen::VectorXd& p);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;
  Eigen::VectorXd forward_one(const Eigen::VectorXd& x) const;

  // Gradient of sum over the batch of <grad_y, y> with respect to the flat
  // parameters. Throws InvalidStateError for a cache from another network state.
  Eigen::VectorXd backward(const Cache& cache, const Eigen::MatrixXd& grad_y) const;
  // Same, also returning the gradient with respect to the input batch.
  Eigen::VectorXd backward(const Cache& cache, const Eigen::MatrixXd& grad_y, Eigen::MatrixXd* grad_x) const;

 private:
  MlpSpec spec_;
  Eigen::VectorXd params_;
  // Every Mlp object (including copies) gets its own identity for cache checks.
  struct Identity {
    std::uint64_t value;
    Identity();
    Identity(const Identity&) : Identity() {}
    Identity& operator=(const Identity&) {
      value = Identity().value;
      return *this;
    }
  };
  Identity id_;
  std::uint64_t generation_ = 0;
};

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 4.0;

// Diagonal Gaussian head on top of an Mlp whose output is [mean; log variance].
// Log variance is clamped to [kLogVarMin, kLogVarMax].
class GaussianPolicy {
 public:
  struct Output {
    Eigen::MatrixXd mean;    // act_dim x N
    Eigen::MatrixXd logvar;  // act_dim x N, clamped
  };

  GaussianPolicy() = default;
  GaussianPolicy(int input_dim, std::vector<int> hidden, int act_dim, std::mt19937_64& rng,
                 double initial_logvar = 0.0);
  // Wraps a network whose output is [mean; log variance]. Throws ShapeError
  // when its output size is odd.
  explicit GaussianPolicy(Mlp net);

  int action_dim() const { return act_dim_; }
  int input_dim() const { return net_.spec().input_dim; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

  Output forward(const Eigen::MatrixXd& x, Mlp::Cache* cache = nullptr) const;
  // Clamped entries of the log variance pass no gradient.
  Eigen::VectorXd backward(const Mlp::Cache& cache, const Eigen::MatrixXd& grad_mean,
                           const Eigen::MatrixXd& grad_logvar, Eigen::MatrixXd* grad_x = nullptr) const;

 private:
  Mlp net_;
  int act_dim_ = 0;
};

// Sum over dimensions of log N(a; mu, var). Throws DomainError for var <= 0.
double gaussian_logprob(const Eigen::VectorXd& mu, const Eigen::VectorXd& var, const Eigen::VectorXd& a);

// mu + sqrt(var) * z with z ~ N(0, I) drawn from rng.
Eigen::VectorXd gaussian_sample(const Eigen::VectorXd& mu, const Eigen::VectorXd& var, std::mt19937_64& rng);

// KL(p || q) for diagonal Gaussians.
double diag_gaussian_kl(const Eigen::VectorXd& mu_p, const Eigen::VectorXd& var_p, const Eigen::VectorXd& mu_q,
                        const Eigen::VectorXd& var_q);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;

  AdamState() = default;
  AdamState(std::size_t n, double learning_rate);
};

// Bias-corrected Adam. Throws ShapeError on size mismatch.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state);

nlohmann::json to_json(const MlpSpec& s);
MlpSpec mlp_spec_from_json(const nlohmann::json& j);

// {"format": "natadv-mlp", "version": 1, "spec": ..., "params": [...]}
nlohmann::json checkpoint_json(const Mlp& net);
Mlp mlp_from_checkpoint(const nlohmann::json& j);

}  // namespace natadv
