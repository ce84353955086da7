#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mtopt/rng.hpp"

namespace mtopt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Linear {
    Matrix W;  // (in, out)
    Vector b;  // (out)
};

struct MlpGrads {
    std::vector<Linear> layers;
};

// Fully connected net, tanh on hidden layers, linear output. Rows are batch
// entries. Sigmoid gating and loss live with the caller so the same core
// serves the Q-function trunk, per-task heads, and the success classifier.
class Mlp {
public:
    Mlp() = default;
    // dims = {in, h1, ..., out}
    Mlp(const std::vector<int>& dims, Rng& rng);

    struct Cache {
        std::vector<Matrix> acts;  // acts[0] = input, acts[i] = post-tanh of layer i
        Matrix z;                  // final pre-activation, (batch, out)
    };

    Matrix forward(const Matrix& X) const;
    Matrix forward(const Matrix& X, Cache& cache) const;

    // dZ is the gradient at the final pre-activation. Returns parameter
    // gradients; when dX is non-null also the gradient at the input.
    MlpGrads backward(const Cache& cache, const Matrix& dZ, Matrix* dX = nullptr) const;

    int input_dim() const { return static_cast<int>(layers_.front().W.rows()); }
    int output_dim() const { return static_cast<int>(layers_.back().W.cols()); }
    std::vector<int> dims() const;

    std::vector<Linear>& layers() { return layers_; }
    const std::vector<Linear>& layers() const { return layers_; }

    int num_params() const;
    Vector flat_params() const;
    void set_flat_params(const Vector& p);

private:
    std::vector<Linear> layers_;
};

MlpGrads zero_grads_like(const Mlp& net);
void accumulate(MlpGrads& into, const MlpGrads& g);
void scale(MlpGrads& g, double factor);
double grad_sq_norm(const MlpGrads& g);

// Plain SGD with momentum; velocity tensors are lazily shaped on first step.
class SgdMomentum {
public:
    SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {}
    void step(Mlp& net, const MlpGrads& grads);

private:
    double lr_, momentum_;
    std::vector<Linear> velocity_;
};

class Adam {
public:
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
    void step(Mlp& net, const MlpGrads& grads);

private:
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<Linear> m_, v_;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace mtopt
