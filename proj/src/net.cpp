#include "mtopt/net.hpp"

#include <cmath>
#include <stdexcept>

namespace mtopt {

Mlp::Mlp(const std::vector<int>& dims, Rng& rng) {
    if (dims.size() < 2) throw std::invalid_argument("Mlp needs at least one layer");
    for (size_t i = 0; i + 1 < dims.size(); ++i) {
        Linear l;
        l.W.resize(dims[i], dims[i + 1]);
        double scale = 1.0 / std::sqrt(static_cast<double>(dims[i]));
        for (Eigen::Index c = 0; c < l.W.cols(); ++c)
            for (Eigen::Index r = 0; r < l.W.rows(); ++r)
                l.W(r, c) = rng.normal(0.0, scale);
        l.b = Vector::Zero(dims[i + 1]);
        layers_.push_back(std::move(l));
    }
}

std::vector<int> Mlp::dims() const {
    std::vector<int> d;
    d.push_back(input_dim());
    for (const auto& l : layers_) d.push_back(static_cast<int>(l.W.cols()));
    return d;
}

Matrix Mlp::forward(const Matrix& X) const {
    Cache cache;
    return forward(X, cache);
}

Matrix Mlp::forward(const Matrix& X, Cache& cache) const {
    if (X.cols() != layers_.front().W.rows())
        throw std::invalid_argument("Mlp input dim mismatch: got " +
                                    std::to_string(X.cols()) + ", want " +
                                    std::to_string(layers_.front().W.rows()));
    cache.acts.clear();
    cache.acts.push_back(X);
    Matrix h = X;
    for (size_t i = 0; i < layers_.size(); ++i) {
        Matrix z = (h * layers_[i].W).rowwise() + layers_[i].b.transpose();
        if (i + 1 < layers_.size()) {
            h = z.array().tanh().matrix();
            cache.acts.push_back(h);
        } else {
            cache.z = z;
            return z;
        }
    }
    return cache.z;  // unreachable
}

MlpGrads Mlp::backward(const Cache& cache, const Matrix& dZ, Matrix* dX) const {
    MlpGrads grads = zero_grads_like(*this);
    Matrix delta = dZ;
    for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
        const Matrix& input = cache.acts[i];
        grads.layers[i].W = input.transpose() * delta;
        grads.layers[i].b = delta.colwise().sum().transpose();
        if (i > 0) {
            Matrix dA = delta * layers_[i].W.transpose();
            // tanh'(z) = 1 - a^2 with a the cached post-activation
            delta = (dA.array() * (1.0 - cache.acts[i].array().square())).matrix();
        } else if (dX) {
            *dX = delta * layers_[0].W.transpose();
        }
    }
    return grads;
}

int Mlp::num_params() const {
    int n = 0;
    for (const auto& l : layers_)
        n += static_cast<int>(l.W.size() + l.b.size());
    return n;
}

Vector Mlp::flat_params() const {
    Vector p(num_params());
    Eigen::Index off = 0;
    for (const auto& l : layers_) {
        p.segment(off, l.W.size()) = Eigen::Map<const Vector>(l.W.data(), l.W.size());
        off += l.W.size();
        p.segment(off, l.b.size()) = l.b;
        off += l.b.size();
    }
    return p;
}

void Mlp::set_flat_params(const Vector& p) {
    if (p.size() != num_params())
        throw std::invalid_argument("flat param size mismatch");
    Eigen::Index off = 0;
    for (auto& l : layers_) {
        Eigen::Map<Vector>(l.W.data(), l.W.size()) = p.segment(off, l.W.size());
        off += l.W.size();
        l.b = p.segment(off, l.b.size());
        off += l.b.size();
    }
}

MlpGrads zero_grads_like(const Mlp& net) {
    MlpGrads g;
    for (const auto& l : net.layers()) {
        Linear z;
        z.W = Matrix::Zero(l.W.rows(), l.W.cols());
        z.b = Vector::Zero(l.b.size());
        g.layers.push_back(std::move(z));
    }
    return g;
}

void accumulate(MlpGrads& into, const MlpGrads& g) {
    for (size_t i = 0; i < into.layers.size(); ++i) {
        into.layers[i].W += g.layers[i].W;
        into.layers[i].b += g.layers[i].b;
    }
}

void scale(MlpGrads& g, double factor) {
    for (auto& l : g.layers) {
        l.W *= factor;
        l.b *= factor;
    }
}

double grad_sq_norm(const MlpGrads& g) {
    double s = 0.0;
    for (const auto& l : g.layers) s += l.W.squaredNorm() + l.b.squaredNorm();
    return s;
}

void SgdMomentum::step(Mlp& net, const MlpGrads& grads) {
    if (velocity_.empty()) {
        for (const auto& l : net.layers())
            velocity_.push_back({Matrix::Zero(l.W.rows(), l.W.cols()),
                                 Vector::Zero(l.b.size())});
    }
    auto& layers = net.layers();
    for (size_t i = 0; i < layers.size(); ++i) {
        velocity_[i].W = momentum_ * velocity_[i].W + grads.layers[i].W;
        velocity_[i].b = momentum_ * velocity_[i].b + grads.layers[i].b;
        layers[i].W -= lr_ * velocity_[i].W;
        layers[i].b -= lr_ * velocity_[i].b;
    }
}

void Adam::step(Mlp& net, const MlpGrads& grads) {
    if (m_.empty()) {
        for (const auto& l : net.layers()) {
            m_.push_back({Matrix::Zero(l.W.rows(), l.W.cols()), Vector::Zero(l.b.size())});
            v_.push_back({Matrix::Zero(l.W.rows(), l.W.cols()), Vector::Zero(l.b.size())});
        }
    }
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    auto& layers = net.layers();
    for (size_t i = 0; i < layers.size(); ++i) {
        m_[i].W = beta1_ * m_[i].W + (1.0 - beta1_) * grads.layers[i].W;
        m_[i].b = beta1_ * m_[i].b + (1.0 - beta1_) * grads.layers[i].b;
        v_[i].W = beta2_ * v_[i].W + (1.0 - beta2_) * grads.layers[i].W.array().square().matrix();
        v_[i].b = beta2_ * v_[i].b + (1.0 - beta2_) * grads.layers[i].b.array().square().matrix();
        layers[i].W.array() -=
            lr_ * (m_[i].W.array() / bc1) / ((v_[i].W.array() / bc2).sqrt() + eps_);
        layers[i].b.array() -=
            lr_ * (m_[i].b.array() / bc1) / ((v_[i].b.array() / bc2).sqrt() + eps_);
    }
}

}  // namespace mtopt
