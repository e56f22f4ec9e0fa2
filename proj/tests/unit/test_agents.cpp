#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "arl/agents.hpp"
#include "arl/errors.hpp"

namespace {

using arl::ActionLabel;
using arl::AgentClass;
using arl::DeviceKind;
using arl::QNetwork;
using arl::RewardParams;
using arl::Transition;

RewardParams params_for(AgentClass cls) {
    RewardParams p;
    p.cls = cls;
    return p;
}

QNetwork small_net(std::uint64_t seed, std::size_t n_in = 4, std::vector<std::size_t> groups = {3, 5, 2}) {
    arl::Rng rng(seed);
    std::size_t n_out = 0;
    for (auto g : groups) n_out += g;
    const std::array<std::size_t, 3> layers{n_in, 32, n_out};
    return QNetwork::random(layers, std::move(groups), rng, 0.5);
}

std::vector<Transition> random_batch(const QNetwork& net, std::size_t n, arl::Rng& rng) {
    std::vector<Transition> batch;
    for (std::size_t i = 0; i < n; ++i) {
        Transition t;
        t.x = Eigen::VectorXd(static_cast<Eigen::Index>(net.input_size()));
        t.x_next = Eigen::VectorXd(static_cast<Eigen::Index>(net.input_size()));
        for (Eigen::Index k = 0; k < t.x.size(); ++k) {
            t.x(k) = arl::uniform(rng, -1.0, 1.0);
            t.x_next(k) = arl::uniform(rng, -1.0, 1.0);
        }
        for (auto g : net.groups) t.actions.push_back(arl::uniform_index(rng, g));
        t.reward = arl::uniform(rng, -1.0, 1.0);
        batch.push_back(std::move(t));
    }
    return batch;
}

// Induced infinity norm: max absolute row sum.
double row_sum_norm(const Eigen::MatrixXd& m) {
    return m.cwiseAbs().rowwise().sum().maxCoeff();
}

// Deterministic 3-state chain. Action 0 = left, action 1 = right.
struct ChainMdp {
    static constexpr std::size_t kStates = 3;
    static constexpr std::size_t kActions = 2;

    static std::size_t next(std::size_t s, std::size_t a) {
        if (a == 0) return s == 0 ? 0 : s - 1;
        return std::min<std::size_t>(s + 1, kStates - 1);
    }
    static double reward(std::size_t s, std::size_t a) {
        if (s == 0 && a == 0) return 0.5;   // small reward for staying put
        if (s == 2 && a == 1) return 1.0;   // larger reward at the far end
        return 0.0;
    }
};

std::array<std::size_t, ChainMdp::kStates> value_iteration_policy(double gamma) {
    std::array<double, ChainMdp::kStates> v{};
    for (int sweep = 0; sweep < 2000; ++sweep) {
        std::array<double, ChainMdp::kStates> nv{};
        for (std::size_t s = 0; s < ChainMdp::kStates; ++s) {
            nv[s] = -std::numeric_limits<double>::infinity();
            for (std::size_t a = 0; a < ChainMdp::kActions; ++a) {
                nv[s] = std::max(nv[s], ChainMdp::reward(s, a) + gamma * v[ChainMdp::next(s, a)]);
            }
        }
        v = nv;
    }
    std::array<std::size_t, ChainMdp::kStates> policy{};
    for (std::size_t s = 0; s < ChainMdp::kStates; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < ChainMdp::kActions; ++a) {
            const double q = ChainMdp::reward(s, a) + gamma * v[ChainMdp::next(s, a)];
            if (q > best + 1e-12) {
                best = q;
                policy[s] = a;
            }
        }
    }
    return policy;
}

}  // namespace

TEST(Reward, CurveExamples) {
    const RewardParams def = params_for(AgentClass::defender);
    const RewardParams att = params_for(AgentClass::attacker);
    EXPECT_NEAR(def.c, 0.24935, 1e-5);
    EXPECT_NEAR(arl::reward(def, 1.0), 1.0 - def.c, 1e-12);
    EXPECT_NEAR(arl::reward(def, 1.0), 0.75065, 1e-5);
    EXPECT_LT(std::abs(arl::reward(att, 1.05)), 1e-9);
    EXPECT_LT(std::abs(arl::reward(def, 0.95)), 1e-9);
    EXPECT_NEAR(arl::reward(att, 1.10), 0.24548, 1e-5);
    EXPECT_NEAR(arl::reward_boundary(def), 0.05, 1e-12);
}

TEST(Reward, AttackerIsNegatedDefenderOnSampledInputs) {
    const RewardParams def = params_for(AgentClass::defender);
    const RewardParams att = params_for(AgentClass::attacker);
    arl::Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const double x = arl::uniform(rng, 0.8, 1.2);
        EXPECT_EQ(arl::reward(att, x), -arl::reward(def, x));
    }
}

TEST(Reward, EvenAboutMuAndSignMatchesBoundary) {
    arl::Rng rng(2);
    for (AgentClass cls : {AgentClass::defender, AgentClass::attacker}) {
        RewardParams p = params_for(cls);
        p.mu = 1.01;
        const double boundary = arl::reward_boundary(p);
        for (int i = 0; i < 1000; ++i) {
            const double d = arl::uniform(rng, 0.0, 0.2);
            EXPECT_NEAR(arl::reward(p, p.mu + d), arl::reward(p, p.mu - d), 1e-12);
            if (std::abs(d - boundary) < 1e-9) continue;
            const bool inside = d < boundary;
            const double r = arl::reward(p, p.mu + d);
            if (cls == AgentClass::defender) {
                EXPECT_EQ(r > 0.0, inside) << d;
            } else {
                EXPECT_EQ(r > 0.0, !inside) << d;
            }
        }
    }
}

TEST(Reward, RejectsBadParameters) {
    RewardParams p;
    p.sigma = 0.0;
    EXPECT_THROW(arl::validate(p), arl::ConfigError);
    p = RewardParams{};
    p.c = 1.0;
    EXPECT_THROW(arl::validate(p), arl::ConfigError);
}

TEST(ActionGroupRules, Validation) {
    arl::ActionGroup g{{DeviceKind::transformer, 0}, {ActionLabel::decrement, ActionLabel::hold, ActionLabel::increment}};
    EXPECT_NO_THROW(arl::validate(g));
    EXPECT_EQ(g.hold_index(), 1u);
    g.labels = {ActionLabel::increment, ActionLabel::decrement};
    EXPECT_THROW(arl::validate(g), arl::ConfigError);
    g.labels = {ActionLabel::hold, ActionLabel::hold};
    EXPECT_THROW(arl::validate(g), arl::ConfigError);
    g.labels = {ActionLabel::hold, ActionLabel::p_increment};
    EXPECT_THROW(arl::validate(g), arl::ConfigError);
}

TEST(Forward, ZeroNetworkGivesZeros) {
    const std::array<std::size_t, 3> layers{4, 32, 10};
    const QNetwork net = QNetwork::zeros(layers, {3, 5, 2});
    const auto q = arl::forward(net, Eigen::VectorXd::Constant(4, 0.7));
    EXPECT_EQ(q.all, Eigen::VectorXd::Zero(10));
    ASSERT_EQ(q.group_count(), 3u);
    EXPECT_EQ(q.group(1).size(), 5u);
}

TEST(Forward, IdentityLinearLayer) {
    const std::array<std::size_t, 2> layers{3, 3};
    QNetwork net = QNetwork::zeros(layers, {3});
    net.hidden = arl::Activation::identity;
    net.weights[0] = Eigen::MatrixXd::Identity(3, 3);
    const Eigen::Vector3d x(0.1, -2.0, 3.5);
    EXPECT_EQ(arl::forward(net, x).all, Eigen::VectorXd(x));
}

TEST(Forward, RejectsWrongInputSize) {
    const QNetwork net = small_net(1);
    EXPECT_THROW(arl::forward(net, Eigen::VectorXd::Zero(5)), arl::ContractError);
}

TEST(Forward, LipschitzBoundFromWeights) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const QNetwork net = small_net(seed);
        double bound = 1.0;
        for (const auto& w : net.weights) bound *= row_sum_norm(w);
        arl::Rng rng(seed + 100);
        for (int trial = 0; trial < 50; ++trial) {
            Eigen::VectorXd x(4);
            Eigen::VectorXd dx(4);
            for (Eigen::Index k = 0; k < 4; ++k) {
                x(k) = arl::uniform(rng, -1.0, 1.0);
                dx(k) = arl::uniform(rng, -1e-3, 1e-3);
            }
            const double delta = dx.cwiseAbs().maxCoeff();
            const double change = (arl::forward(net, x + dx).all - arl::forward(net, x).all).cwiseAbs().maxCoeff();
            EXPECT_LE(change, bound * delta * (1.0 + 1e-12));
        }
    }
}

TEST(SelectActions, GreedyOrderingAndTies) {
    const std::array<std::size_t, 2> layers{2, 5};
    QNetwork net = QNetwork::zeros(layers, {3, 2});
    net.biases[0] << 0.1, 0.9, 0.3, -1.0, -0.5;
    arl::Rng rng(4);
    EXPECT_EQ(arl::select_actions(net, Eigen::VectorXd::Zero(2), 0.0, rng), (arl::ActionChoice{1, 1}));
    net.biases[0] << 0.2, 0.2, 0.2, 0.0, 0.0;
    EXPECT_EQ(arl::select_actions(net, Eigen::VectorXd::Zero(2), 0.0, rng), (arl::ActionChoice{0, 0}));
    EXPECT_EQ(arl::argmax(std::vector<double>{1.0, 3.0, 3.0}), 1u);
}

TEST(SelectActions, FullExplorationIsSeededAndUniform) {
    const QNetwork net = small_net(2);
    arl::Rng a(99);
    arl::Rng b(99);
    std::vector<std::size_t> counts(5, 0);
    const Eigen::VectorXd x = Eigen::VectorXd::Constant(4, 0.1);
    const int draws = 20000;
    for (int i = 0; i < draws; ++i) {
        const auto ca = arl::select_actions(net, x, 1.0, a);
        const auto cb = arl::select_actions(net, x, 1.0, b);
        ASSERT_EQ(ca, cb);
        ++counts[ca[1]];
    }
    for (auto c : counts) {
        EXPECT_NEAR(static_cast<double>(c) / draws, 0.2, 0.02);
    }
}

TEST(TdLearning, GradientMatchesFiniteDifferences) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        QNetwork net = small_net(seed);
        arl::Rng rng(seed + 1000);
        const auto batch = random_batch(net, 5, rng);
        const auto targets = arl::compute_td_targets(net, batch, 0.9);
        const auto grad = arl::td_loss_gradient(net, batch, targets);
        EXPECT_NEAR(grad.loss, arl::td_loss(net, batch, targets), 1e-12);

        const double h = 1e-5;
        double diff_sq = 0.0;
        double ref_sq = 0.0;
        double worst = 0.0;
        auto check = [&](double& param, double analytic) {
            const double saved = param;
            param = saved + h;
            const double up = arl::td_loss(net, batch, targets);
            param = saved - h;
            const double down = arl::td_loss(net, batch, targets);
            param = saved;
            const double fd = (up - down) / (2.0 * h);
            diff_sq += (analytic - fd) * (analytic - fd);
            ref_sq += fd * fd;
            worst = std::max(worst, std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-3}));
        };
        for (std::size_t l = 0; l < net.weights.size(); ++l) {
            for (Eigen::Index i = 0; i < net.weights[l].rows(); ++i) {
                for (Eigen::Index j = 0; j < net.weights[l].cols(); ++j) {
                    check(net.weights[l](i, j), grad.weights[l](i, j));
                }
                check(net.biases[l](i), grad.biases[l](i));
            }
        }
        EXPECT_LT(std::sqrt(diff_sq / ref_sq), 1e-4) << "seed " << seed;
        EXPECT_LT(worst, 1e-4) << "seed " << seed;
    }
}

TEST(TdLearning, GammaZeroFixedPoint) {
    const std::array<std::size_t, 3> layers{3, 8, 4};
    QNetwork net = QNetwork::zeros(layers, {2, 2});
    net.biases[1].setConstant(0.37);
    Transition t{Eigen::VectorXd::Constant(3, 0.2), {1, 0}, 0.37, Eigen::VectorXd::Constant(3, -0.1)};
    const std::vector<Transition> batch{t};
    const auto targets = arl::compute_td_targets(net, batch, 0.0);
    const auto grad = arl::td_loss_gradient(net, batch, targets);
    EXPECT_EQ(grad.loss, 0.0);
    for (const auto& w : grad.weights) EXPECT_EQ(w.cwiseAbs().maxCoeff(), 0.0);
    for (const auto& b : grad.biases) EXPECT_EQ(b.cwiseAbs().maxCoeff(), 0.0);
    const QNetwork before = net;
    EXPECT_EQ(arl::td_update(net, batch, 0.0, 1e-3), 0.0);
    EXPECT_EQ(net.weights, before.weights);
    EXPECT_EQ(net.biases, before.biases);
}

TEST(TdLearning, ConstantTransitionRegressesToReward) {
    QNetwork net = small_net(5, 4, {3, 3});
    const double r = 0.75;
    Transition t{Eigen::VectorXd::Constant(4, 0.3), {2, 0}, r, Eigen::VectorXd::Constant(4, 0.3)};
    const std::vector<Transition> batch{t};
    int steps = 0;
    auto chosen_error = [&] {
        const auto q = arl::forward(net, t.x);
        return std::max(std::abs(q.group(0)[2] - r), std::abs(q.group(1)[0] - r));
    };
    while (chosen_error() >= 1e-3 && steps < 5000) {
        arl::td_update(net, batch, 0.0, 1e-3);
        ++steps;
    }
    EXPECT_LT(chosen_error(), 1e-3);
    EXPECT_LE(steps, 5000);
}

TEST(TdLearning, NonFiniteWeightsRaiseDivergence) {
    QNetwork net = small_net(6);
    arl::Rng rng(6);
    const auto batch = random_batch(net, 3, rng);
    net.weights[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(arl::td_update(net, batch, 0.9, 1e-3), arl::DivergenceError);
}

TEST(Replay, RingBufferAndSeededSampling) {
    arl::ReplayBuffer buffer(3);
    for (int i = 0; i < 5; ++i) {
        buffer.push({Eigen::VectorXd::Constant(1, i), {0}, static_cast<double>(i), Eigen::VectorXd::Zero(1)});
    }
    ASSERT_EQ(buffer.size(), 3u);
    std::vector<double> held;
    for (std::size_t i = 0; i < buffer.size(); ++i) held.push_back(buffer[i].reward);
    std::sort(held.begin(), held.end());
    EXPECT_EQ(held, (std::vector<double>{2.0, 3.0, 4.0}));
    arl::Rng a(1);
    arl::Rng b(1);
    const auto sa = buffer.sample(8, a);
    const auto sb = buffer.sample(8, b);
    ASSERT_EQ(sa.size(), 8u);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(sa[i].reward, sb[i].reward);
}

TEST(Schedule, EpsilonAnneal) {
    const auto p = arl::LearnerParams::defaults(arl::LearnerKind::qnet);
    EXPECT_EQ(arl::epsilon_at(p, 0), 1.0);
    EXPECT_NEAR(arl::epsilon_at(p, 500), 0.525, 1e-12);
    EXPECT_EQ(arl::epsilon_at(p, 1000), 0.05);
    EXPECT_EQ(arl::epsilon_at(p, 5000), 0.05);
}

TEST(Tabular, Discretization) {
    const auto p = arl::LearnerParams::defaults(arl::LearnerKind::tabular);
    EXPECT_EQ(arl::discretize(1.0, p), 10u);
    EXPECT_EQ(arl::discretize(0.85, p), 0u);
    EXPECT_EQ(arl::discretize(0.2, p), 0u);
    EXPECT_EQ(arl::discretize(1.15, p), 20u);
    EXPECT_EQ(arl::discretize(3.0, p), 20u);
}

TEST(Tabular, ZeroLearningRateAndUnvisitedRows) {
    arl::TabularQ q(4, {3, 2});
    for (std::size_t s = 0; s < 4; ++s) {
        for (double v : q.row(s)) EXPECT_EQ(v, 0.0);
    }
    q.update(1, {2, 1}, 5.0, 2, 0.0, 0.9);
    for (std::size_t s = 0; s < 4; ++s) {
        for (double v : q.row(s)) EXPECT_EQ(v, 0.0);
    }
    q.update(1, {2, 1}, 5.0, 2, 0.5, 0.9);
    EXPECT_EQ(q.value(1, 0, 2), 2.5);
    EXPECT_EQ(q.value(1, 1, 1), 2.5);
    for (std::size_t s : {0u, 2u, 3u}) {
        for (double v : q.row(s)) EXPECT_EQ(v, 0.0);
    }
}

TEST(Tabular, RecoversValueIterationPolicyOnChain) {
    const double gamma = 0.9;
    const auto oracle = value_iteration_policy(gamma);
    arl::TabularQ q(ChainMdp::kStates, {ChainMdp::kActions});
    arl::Rng rng(2024);
    std::size_t s = 0;
    for (int step = 0; step < 10000; ++step) {
        const std::size_t a = q.select(s, 0.3, rng)[0];
        const std::size_t next = ChainMdp::next(s, a);
        q.update(s, {a}, ChainMdp::reward(s, a), next, 0.1, gamma);
        s = next;
    }
    for (std::size_t state = 0; state < ChainMdp::kStates; ++state) {
        EXPECT_EQ(q.greedy(state)[0], oracle[state]) << "state " << state;
    }
}

TEST(AgentInstance, ActIsDeterministicAndAdvancesSchedule) {
    arl::SensorBinding sensors;
    sensors.sensors = {{0, arl::SensorQuantity::v_pu}, {1, arl::SensorQuantity::v_pu}};
    const std::vector<arl::ActionGroup> groups{
        {{DeviceKind::transformer, 0}, arl::default_labels(DeviceKind::transformer)},
        {{DeviceKind::generator, 0}, arl::default_labels(DeviceKind::generator)}};
    const auto learner = arl::LearnerParams::defaults(arl::LearnerKind::qnet);
    arl::Agent a("a", AgentClass::attacker, sensors, groups, params_for(AgentClass::attacker), learner, 17);
    arl::Agent b("a", AgentClass::attacker, sensors, groups, params_for(AgentClass::attacker), learner, 17);
    EXPECT_EQ(a.epsilon(), 1.0);
    const std::vector<double> x{1.01, 0.99};
    for (int i = 0; i < 50; ++i) {
        const auto ya = a.act(x);
        const auto yb = b.act(x);
        ASSERT_EQ(ya, yb);
        ASSERT_EQ(ya.size(), 2u);
        EXPECT_EQ(a.learn(0.1, x), b.learn(0.1, x));
    }
    EXPECT_EQ(a.step(), 50u);
    EXPECT_EQ(a.network()->weights, b.network()->weights);
}

TEST(AgentInstance, HoldEverywhereIsAnEmptyChange) {
    const std::vector<arl::ActionGroup> groups{
        {{DeviceKind::load, 2}, arl::default_labels(DeviceKind::load)},
        {{DeviceKind::generator, 1}, arl::default_labels(DeviceKind::generator)}};
    arl::ActionChoice choice;
    for (const auto& g : groups) choice.push_back(g.hold_index());
    const auto actions = arl::to_actions(groups, choice);
    ASSERT_EQ(actions.size(), 2u);
    for (const auto& a : actions) EXPECT_EQ(a.label, ActionLabel::hold);
}
