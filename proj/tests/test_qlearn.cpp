#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "mtopt/qlearn.hpp"
#include "test_util.hpp"

using namespace mtopt;

namespace {

// Same ordering as QFunction::flat_params: trunk then heads, W then b per layer.
Vector flatten_grads(const QFunction& q, const QGrads& g) {
    Vector out(q.num_params());
    Eigen::Index off = 0;
    auto emit = [&](const MlpGrads& mg) {
        for (const auto& l : mg.layers) {
            out.segment(off, l.W.size()) =
                Eigen::Map<const Vector>(l.W.data(), l.W.size());
            off += l.W.size();
            out.segment(off, l.b.size()) = l.b;
            off += l.b.size();
        }
    };
    emit(g.trunk);
    for (const auto& h : g.heads) emit(h);
    return out;
}

struct RandomBatch {
    Matrix Obs, Act;
    std::vector<int> tasks;
    Vector targets;
};

RandomBatch random_batch(Rng& rng, int B, int obs_dim, int n_tasks) {
    RandomBatch b;
    b.Obs.resize(B, obs_dim);
    b.Act.resize(B, kActionDim);
    b.targets.resize(B);
    for (int r = 0; r < B; ++r) {
        for (int c = 0; c < obs_dim; ++c) b.Obs(r, c) = rng.uniform(-1, 1);
        for (int c = 0; c < kActionDim; ++c) b.Act(r, c) = rng.uniform(-1, 1);
        b.tasks.push_back(static_cast<int>(rng.uniform_index(n_tasks)));
        b.targets(r) = rng.uniform();
    }
    return b;
}

}  // namespace

TEST_CASE("all-zero weights give q = 0.5 everywhere") {
    Rng rng(109);
    for (QArch arch : {QArch::SingleHeaded, QArch::MultiHeaded}) {
        QFunction q = QFunction::make(arch, 6, 3, rng, {8, 8}, {4});
        q.set_flat_params(Vector::Zero(q.num_params()));
        std::vector<float> obs = {0.3f, -0.2f, 0.9f, 0.1f, -0.5f, 0.7f};
        CHECK(q.forward(obs, action_to_vec({0.4, 0.1, -0.3}), 1) == 0.5);
    }
}

TEST_CASE("output stays strictly inside (0,1)") {
    Rng rng(113);
    QFunction q = QFunction::make(QArch::SingleHeaded, 4, 2, rng);
    for (int i = 0; i < 50; ++i) {
        std::vector<float> obs;
        for (int c = 0; c < 4; ++c) obs.push_back(static_cast<float>(rng.uniform(-5, 5)));
        Vector a(kActionDim);
        for (int d = 0; d < kActionDim; ++d) a(d) = rng.uniform(-1, 1);
        double v = q.forward(obs, a, static_cast<int>(rng.uniform_index(2)));
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("permuting the task one-hot changes the output for generic weights") {
    Rng rng(127);
    QFunction q = QFunction::make(QArch::SingleHeaded, 5, 4, rng);
    std::vector<float> obs = {0.1f, 0.2f, 0.3f, 0.4f, 0.5f};
    Vector a = action_to_vec({0.2, -0.1, 0.6});
    CHECK(q.forward(obs, a, 0) != q.forward(obs, a, 3));
}

TEST_CASE("multi-headed net embeds exactly into a single-headed one") {
    Rng rng(131);
    const int obs_dim = 4;
    QFunction multi = QFunction::make(QArch::MultiHeaded, obs_dim, 1, rng, {10, 7}, {6, 5});
    QFunction single = QFunction::make(QArch::SingleHeaded, obs_dim, 1, rng, {10, 7, 6, 5});

    // Composite layer stack of the multi-headed variant: trunk layers, then
    // head layers; the one-hot input row of the single-headed net is zeroed
    // (the task input is constant for n=1 anyway).
    auto& sl = single.trunk().layers();
    const auto& tl = multi.trunk().layers();
    const auto& hl = multi.heads()[0].layers();
    REQUIRE(sl.size() == tl.size() + hl.size());
    sl[0].W.setZero();
    sl[0].W.topRows(obs_dim + kActionDim) = tl[0].W;
    sl[0].b = tl[0].b;
    for (size_t i = 1; i < tl.size(); ++i) sl[i] = tl[i];
    for (size_t i = 0; i < hl.size(); ++i) sl[tl.size() + i] = hl[i];

    Rng probe(137);
    for (int i = 0; i < 30; ++i) {
        std::vector<float> obs;
        for (int c = 0; c < obs_dim; ++c)
            obs.push_back(static_cast<float>(probe.uniform(-1, 1)));
        Vector a(kActionDim);
        for (int d = 0; d < kActionDim; ++d) a(d) = probe.uniform(-1, 1);
        CHECK(single.forward(obs, a, 0) ==
              doctest::Approx(multi.forward(obs, a, 0)).epsilon(1e-12));
    }
}

TEST_CASE("matched targets sit at a stationary point of the BCE loss") {
    Rng rng(139);
    QFunction q = QFunction::make(QArch::SingleHeaded, 4, 2, rng);
    RandomBatch b = random_batch(rng, 16, 4, 2);
    b.targets = q.forward_batch(b.Obs, b.Act, b.tasks);  // target == prediction
    auto [loss, grads] = q.loss_and_grad(b.Obs, b.Act, b.tasks, b.targets);
    CHECK(std::sqrt(flatten_grads(q, grads).squaredNorm()) <= 1e-8);
}

TEST_CASE("targets outside [0,1] are rejected") {
    Rng rng(149);
    QFunction q = QFunction::make(QArch::SingleHeaded, 4, 2, rng);
    RandomBatch b = random_batch(rng, 4, 4, 2);
    b.targets(2) = 1.3;
    CHECK_THROWS(q.loss_and_grad(b.Obs, b.Act, b.tasks, b.targets));
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(151);
    for (QArch arch : {QArch::SingleHeaded, QArch::MultiHeaded}) {
        for (int net_i = 0; net_i < 4; ++net_i) {
            QFunction q = QFunction::make(arch, 3, 2, rng, {6, 5}, {4});
            RandomBatch b = random_batch(rng, 8, 3, 2);
            auto [loss, grads] = q.loss_and_grad(b.Obs, b.Act, b.tasks, b.targets);
            Vector g = flatten_grads(q, grads);
            Vector p = q.flat_params();
            const double eps = 1e-5;
            double max_rel = 0.0;
            for (int i = 0; i < q.num_params(); ++i) {
                Vector pp = p;
                pp(i) += eps;
                q.set_flat_params(pp);
                double lp = q.loss_and_grad(b.Obs, b.Act, b.tasks, b.targets).first;
                pp(i) -= 2 * eps;
                q.set_flat_params(pp);
                double lm = q.loss_and_grad(b.Obs, b.Act, b.tasks, b.targets).first;
                q.set_flat_params(p);
                double fd = (lp - lm) / (2 * eps);
                double rel = std::abs(fd - g(i)) / std::max(1.0, std::abs(g(i)));
                max_rel = std::max(max_rel, rel);
            }
            CHECK(max_rel <= 1e-4);
        }
    }
}

TEST_CASE("duplicated batch rows leave the mean gradient unchanged") {
    Rng rng(157);
    QFunction q = QFunction::make(QArch::SingleHeaded, 4, 2, rng);
    RandomBatch b = random_batch(rng, 6, 4, 2);

    RandomBatch dup;
    dup.Obs.resize(12, 4);
    dup.Act.resize(12, kActionDim);
    dup.targets.resize(12);
    dup.Obs << b.Obs, b.Obs;
    dup.Act << b.Act, b.Act;
    dup.targets << b.targets, b.targets;
    dup.tasks = b.tasks;
    dup.tasks.insert(dup.tasks.end(), b.tasks.begin(), b.tasks.end());

    auto [l1, g1] = q.loss_and_grad(b.Obs, b.Act, b.tasks, b.targets);
    auto [l2, g2] = q.loss_and_grad(dup.Obs, dup.Act, dup.tasks, dup.targets);
    CHECK(l1 == doctest::Approx(l2).epsilon(1e-12));
    Vector d = flatten_grads(q, g1) - flatten_grads(q, g2);
    CHECK(std::sqrt(d.squaredNorm()) <= 1e-10);
}

TEST_CASE("CEM finds the maximum of a concave quadratic stub") {
    CemConfig cfg;
    cfg.iterations = 5;
    cfg.samples_per_iter = 128;
    cfg.elites = 12;
    for (int seed = 0; seed < 20; ++seed) {
        Rng rng(163 + seed);
        double center = -0.6 + 0.09 * seed;  // sweep the box
        auto score = [&](const Matrix& actions) {
            Vector s(actions.rows());
            for (Eigen::Index r = 0; r < actions.rows(); ++r)
                s(r) = 1.0 - (actions(r, 0) - center) * (actions(r, 0) - center);
            return s;
        };
        // dense grid-search oracle on the scored dim
        double grid_best = -1e9, grid_arg = 0.0;
        for (double a = -1.0; a <= 1.0001; a += 0.001) {
            double v = 1.0 - (a - center) * (a - center);
            if (v > grid_best) {
                grid_best = v;
                grid_arg = a;
            }
        }
        auto [a, v] = cem_maximize(score, cfg, rng);
        CHECK(std::abs(a(0) - grid_arg) <= 0.05);
        CHECK(v <= grid_best + 1e-12);
    }
}

TEST_CASE("CEM on a constant stub returns that constant") {
    CemConfig cfg;
    Rng rng(167);
    auto score = [](const Matrix& actions) {
        return Vector::Constant(actions.rows(), 0.37).eval();
    };
    auto [a, v] = cem_maximize(score, cfg, rng);
    CHECK(v == 0.37);
}

TEST_CASE("CEM best-seen score is monotone across iterations") {
    auto score = [](const Matrix& actions) {
        Vector s(actions.rows());
        for (Eigen::Index r = 0; r < actions.rows(); ++r)
            s(r) = -(actions.row(r).squaredNorm());
        return s;
    };
    std::vector<double> bests;
    for (int iters = 1; iters <= 4; ++iters) {
        CemConfig cfg;
        cfg.iterations = iters;
        Rng rng(173);  // same stream prefix each time
        bests.push_back(cem_maximize(score, cfg, rng).second);
    }
    for (size_t i = 0; i + 1 < bests.size(); ++i) CHECK(bests[i + 1] >= bests[i]);
}

TEST_CASE("CEM value beats the initial-mean action") {
    Rng rng(179);
    QFunction q = QFunction::make(QArch::SingleHeaded, 4, 2, rng);
    std::vector<float> obs = {0.2f, -0.4f, 0.6f, 0.0f};
    CemConfig cfg;
    Vector mid = (action_lower_bounds() + action_upper_bounds()) / 2.0;
    double q_mid = q.forward(obs, mid, 0);
    Rng cem_rng(181);
    auto [a, v] = cem_maximize_q(q, obs, 0, cfg, cem_rng);
    CHECK(v >= q_mid - 0.05);  // snapped candidates may exclude the exact midpoint
    CHECK(v >= q.forward(obs, a, 0) - 1e-12);
}

TEST_CASE("bellman targets: terminal rule, formula arithmetic, grid oracle") {
    Rng rng(191);
    QFunction q = QFunction::make(QArch::SingleHeaded, 27, 2, rng);
    auto ep = std::make_shared<Episode>(testutil::random_episode(rng, "bt", "lift-any", 3));

    SampleRow terminal{ep, 2, "lift-any", 1.0, true};
    CemConfig cfg;
    BellmanTarget t = bellman_target(terminal, 0, q, 0.9, cfg, rng);
    CHECK(t.value == 1.0);
    CHECK(t.v_next == 0.0);

    SampleRow mid{ep, 0, "lift-any", 0.0, false};
    BellmanTarget m = bellman_target(mid, 0, q, 0.9, cfg, rng);
    CHECK(m.value == doctest::Approx(std::clamp(0.0 + 0.9 * m.v_next, 0.0, 1.0)));
    CHECK(m.value >= 0.0);
    CHECK(m.value <= 1.0);

    // exhaustive lattice/grid max over the 5-dim action box
    double grid_v = -1e9;
    const auto& next_input = mid.next_obs().as_input();
    for (double dx = -1.0; dx <= 1.01; dx += 0.25)
        for (double dy = -1.0; dy <= 1.01; dy += 0.25)
            for (double dz = -1.0; dz <= 1.01; dz += 0.25)
                for (double g : {-1.0, 0.0, 1.0})
                    for (double term : {0.0, 1.0}) {
                        Vector a(kActionDim);
                        a << dx, dy, dz, g, term;
                        grid_v = std::max(grid_v, q.forward(next_input, a, 0));
                    }
    CemConfig strong;
    strong.iterations = 5;
    strong.samples_per_iter = 256;
    strong.elites = 16;
    BellmanTarget s = bellman_target(mid, 0, q, 0.9, strong, rng);
    CHECK(std::abs(s.v_next - grid_v) <= 0.05);
}

TEST_CASE("policy_act epsilon branches") {
    Rng rng(193);
    QFunction q = QFunction::make(QArch::SingleHeaded, 4, 1, rng);
    std::vector<float> obs = {0.1f, 0.5f, -0.3f, 0.2f};
    CemConfig cfg;
    cfg.iterations = 1;
    cfg.samples_per_iter = 8;
    cfg.elites = 2;

    SUBCASE("epsilon=0 is deterministic given the seed") {
        Rng r1(197), r2(197);
        Action a1 = policy_act(q, obs, 0, cfg, 0.0, r1);
        Action a2 = policy_act(q, obs, 0, cfg, 0.0, r2);
        CHECK(a1 == a2);
    }

    SUBCASE("epsilon=1 draws uniform actions (KS test on dx)") {
        Rng r(199);
        const int draws = 10000;
        // terminate is canonical: those samples have dx forced to 0, so the
        // uniformity claim applies to the non-terminate draws
        std::vector<double> xs;
        int terminates = 0;
        for (int i = 0; i < draws; ++i) {
            Action a = policy_act(q, obs, 0, cfg, 1.0, r);
            if (a.terminate)
                ++terminates;
            else
                xs.push_back(a.dx);
        }
        // the terminate dimension itself is uniform on [0,1] thresholded at 0.5
        CHECK(terminates > draws / 2 - 300);
        CHECK(terminates < draws / 2 + 300);
        std::sort(xs.begin(), xs.end());
        double n = static_cast<double>(xs.size());
        double d = 0.0;
        for (size_t i = 0; i < xs.size(); ++i) {
            double cdf = (xs[i] + 1.0) / 2.0;  // uniform on [-1,1]
            d = std::max(d, std::abs(cdf - static_cast<double>(i + 1) / n));
            d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
        }
        CHECK(d < 1.63 / std::sqrt(n));  // alpha = 0.01
    }

    SUBCASE("epsilon=0.1 takes the random branch about 10% of the time") {
        // The CEM branch consumes far more RNG draws; detect the branch by
        // comparing against a replicate greedy policy call on a forked stream.
        Rng r(211);
        int random_branch = 0;
        const int n = 10000;
        for (int i = 0; i < n; ++i) {
            Rng probe = r;   // copy of the stream state
            probe.uniform();  // mirror the bernoulli draw the eps call makes
            Action greedy = policy_act(q, obs, 0, cfg, 0.0, probe);
            Action a = policy_act(q, obs, 0, cfg, 0.1, r);
            if (!(a == greedy)) ++random_branch;
        }
        double frac = static_cast<double>(random_branch) / n;
        CHECK(frac > 0.09);
        CHECK(frac < 0.11);
    }
}

TEST_CASE("task conditioning: one net learns opposite labels per task") {
    // two tasks with opposite targets on the same inputs
    Rng rng(223);
    QFunction q = QFunction::make(QArch::SingleHeaded, 3, 2, rng, {32, 32});
    QOptimizer opt(QOptimizer::Kind::Adam, 1e-2);
    Matrix Obs(64, 3), Act(64, kActionDim);
    std::vector<int> tasks;
    Vector targets(64);
    Rng data(227);
    for (int step = 0; step < 800; ++step) {
        for (int r = 0; r < 64; ++r) {
            bool positive = data.bernoulli(0.5);
            int task = static_cast<int>(data.uniform_index(2));
            for (int c = 0; c < 3; ++c) Obs(r, c) = data.uniform(-1, 1);
            Obs(r, 0) = positive ? 0.8 : -0.8;
            for (int c = 0; c < kActionDim; ++c) Act(r, c) = 0.0;
            if (static_cast<int>(tasks.size()) <= r)
                tasks.push_back(task);
            else
                tasks[r] = task;
            targets(r) = (positive == (task == 0)) ? 1.0 : 0.0;
        }
        opt.step(q, q.loss_and_grad(Obs, Act, tasks, targets).second);
    }
    int correct = 0, total = 0;
    Rng hold(229);
    for (int i = 0; i < 400; ++i) {
        bool positive = hold.bernoulli(0.5);
        int task = static_cast<int>(hold.uniform_index(2));
        std::vector<float> obs = {positive ? 0.8f : -0.8f,
                                  static_cast<float>(hold.uniform(-1, 1)),
                                  static_cast<float>(hold.uniform(-1, 1))};
        double p = q.forward(obs, Vector::Zero(kActionDim), task);
        bool want = positive == (task == 0);
        correct += (p >= 0.5) == want ? 1 : 0;
        ++total;
    }
    CHECK(static_cast<double>(correct) / total >= 0.95);
}

TEST_CASE("checkpoint save/load is bit-exact") {
    Rng rng(233);
    TaskRegistry reg = TaskRegistry::default_catalog();
    for (QArch arch : {QArch::SingleHeaded, QArch::MultiHeaded}) {
        QFunction q = QFunction::make(arch, 7, reg.num_tasks(), rng, {8, 8}, {4});
        std::string path =
            (std::filesystem::temp_directory_path() / "mtopt_q_rt.bin").string();
        q.save(path, reg);
        auto [back, back_reg] = QFunction::load(path);
        CHECK(back.arch() == q.arch());
        CHECK(back.flat_params() == q.flat_params());
        CHECK(back_reg.num_tasks() == reg.num_tasks());
    }
}

TEST_CASE("extend_tasks leaves existing task outputs unchanged") {
    Rng rng(239);
    for (QArch arch : {QArch::SingleHeaded, QArch::MultiHeaded}) {
        QFunction q = QFunction::make(arch, 5, 2, rng, {8}, {4});
        std::vector<float> obs = {0.1f, 0.2f, 0.3f, 0.4f, 0.5f};
        Vector a = action_to_vec({0.3, -0.3, 0.1});
        double before0 = q.forward(obs, a, 0);
        double before1 = q.forward(obs, a, 1);
        q.extend_tasks(4, rng);
        CHECK(q.num_tasks() == 4);
        CHECK(q.forward(obs, a, 0) == before0);
        CHECK(q.forward(obs, a, 1) == before1);
        CHECK_THROWS(q.extend_tasks(2, rng));
    }
}
