#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "arl/core.hpp"
#include "arl/rng.hpp"

namespace arl {

// ---------------------------------------------------------------------------
// Reward curve

/// Width and offset of the Gaussian-shaped reward curve around mu.
struct RewardParams {
    double mu = 1.0;
    double sigma = 0.03;
    double c = default_offset(0.03, 0.05);
    AgentClass cls = AgentClass::defender;

    /// Offset that puts the zero crossing at |x - mu| = deviation.
    static double default_offset(double sigma, double deviation);

    bool operator==(const RewardParams&) const = default;
};

void validate(const RewardParams& params);

/// Defender: exp(-(x-mu)^2 / 2 sigma^2) - c. Attacker: the negation of that.
double reward(const RewardParams& params, double x_mean);

/// Deviation |x - mu| at which the reward changes sign.
double reward_boundary(const RewardParams& params);

double mean(std::span<const double> values);

// ---------------------------------------------------------------------------
// Action groups

/// Discrete label set of one actuator; exactly one label is picked per step.
struct ActionGroup {
    ActuatorRef actuator;
    std::vector<ActionLabel> labels;

    std::size_t hold_index() const;

    bool operator==(const ActionGroup&) const = default;
};

/// Throws ConfigError unless the group has >= 2 distinct labels including hold,
/// all valid for the device kind.
void validate(const ActionGroup& group);

std::vector<std::size_t> group_sizes(std::span<const ActionGroup> groups);

/// Indices of the chosen label per group, in group order.
using ActionChoice = std::vector<std::size_t>;

std::vector<ActuatorAction> to_actions(std::span<const ActionGroup> groups, const ActionChoice& choice);

// ---------------------------------------------------------------------------
// Q-network

enum class Activation { tanh, identity };

/// Fully connected network with `hidden` activation on every layer but the last.
struct QNetwork {
    std::vector<Eigen::MatrixXd> weights;  // weights[l] is out x in
    std::vector<Eigen::VectorXd> biases;
    Activation hidden = Activation::tanh;
    std::vector<std::size_t> groups;  // output partition, sums to output size

    std::size_t input_size() const { return static_cast<std::size_t>(weights.front().cols()); }
    std::size_t output_size() const { return static_cast<std::size_t>(weights.back().rows()); }
    std::size_t parameter_count() const;
    bool all_finite() const;

    /// Layer sizes [n_in, ..., n_out]; parameters uniform in [-scale, scale].
    static QNetwork random(std::span<const std::size_t> layer_sizes, std::vector<std::size_t> groups, Rng& rng,
                           double scale);
    static QNetwork zeros(std::span<const std::size_t> layer_sizes, std::vector<std::size_t> groups);
};

/// Q-values partitioned per action group.
struct QValues {
    Eigen::VectorXd all;
    std::vector<std::size_t> offsets;  // offsets[g] is the first entry of group g

    std::span<const double> group(std::size_t g) const;
    std::size_t group_count() const { return offsets.size(); }
};

/// Throws ContractError when x has the wrong length.
QValues forward(const QNetwork& net, const Eigen::VectorXd& x);

/// First index of the maximum; ties resolve to the lowest index.
std::size_t argmax(std::span<const double> values);

/// Epsilon-greedy choice per group.
ActionChoice select_actions(const QNetwork& net, const Eigen::VectorXd& x, double epsilon, Rng& rng);

struct Transition {
    Eigen::VectorXd x;
    ActionChoice actions;
    double reward = 0.0;
    Eigen::VectorXd x_next;
};

/// Per transition, per group bootstrap target r + gamma * max_a Q_g(x', a).
using TdTargets = std::vector<std::vector<double>>;

TdTargets compute_td_targets(const QNetwork& net, std::span<const Transition> batch, double gamma);

/// Mean over the batch of the summed per-group squared TD errors, targets held fixed.
double td_loss(const QNetwork& net, std::span<const Transition> batch, const TdTargets& targets);

struct NetworkGradient {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    double loss = 0.0;
};

/// Backpropagated gradient of td_loss with respect to every parameter.
NetworkGradient td_loss_gradient(const QNetwork& net, std::span<const Transition> batch, const TdTargets& targets);

/// One semi-gradient descent step. Returns the pre-step loss.
/// Throws DivergenceError on a non-finite loss or weights.
double td_update(QNetwork& net, std::span<const Transition> batch, double gamma, double learning_rate);

// ---------------------------------------------------------------------------
// Experience replay

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Transition transition);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& operator[](std::size_t i) const { return items_[i]; }

    /// Uniform sampling with replacement.
    std::vector<Transition> sample(std::size_t batch_size, Rng& rng) const;

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<Transition> items_;
};

// ---------------------------------------------------------------------------
// Learners

enum class LearnerKind { qnet, tabular };

const char* to_string(LearnerKind kind);
LearnerKind learner_kind_from_string(const std::string& text);

struct LearnerParams {
    LearnerKind kind = LearnerKind::qnet;
    double gamma = 0.95;
    double learning_rate = 1e-3;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    std::size_t epsilon_decay_steps = 1000;
    // qnet
    std::size_t hidden = 32;
    std::size_t replay_capacity = 1000;
    std::size_t batch_size = 32;
    double init_scale = 0.1;
    // tabular
    std::size_t bins = 21;
    double bin_lo = 0.85;
    double bin_hi = 1.15;

    static LearnerParams defaults(LearnerKind kind);

    bool operator==(const LearnerParams&) const = default;
};

void validate(const LearnerParams& params);

/// Linear anneal from start to end over decay_steps, then constant.
double epsilon_at(const LearnerParams& params, std::size_t step);

/// Q-table over integer states with factored per-group actions.
class TabularQ {
public:
    TabularQ(std::size_t states, std::vector<std::size_t> groups);

    std::span<const double> row(std::size_t state) const;
    double value(std::size_t state, std::size_t group, std::size_t label) const;
    std::size_t state_count() const { return states_; }

    ActionChoice select(std::size_t state, double epsilon, Rng& rng) const;
    ActionChoice greedy(std::size_t state) const;

    /// Q(s,a_g) += alpha (r + gamma max Q_g(s',.) - Q(s,a_g)) for every group g.
    void update(std::size_t state, const ActionChoice& actions, double reward, std::size_t next_state, double alpha,
                double gamma);

private:
    std::size_t states_;
    std::vector<std::size_t> groups_;
    std::vector<std::size_t> offsets_;
    std::size_t width_;
    std::vector<double> table_;
};

/// Bin of the mean voltage over [bin_lo, bin_hi]; values outside clamp to the edge bins.
std::size_t discretize(double x_mean, const LearnerParams& params);

// ---------------------------------------------------------------------------
// Agent instance

/// Learner-side view of sensor readings: deviation from 1 pu, scaled to order one.
Eigen::VectorXd to_features(std::span<const double> observation);

class Agent {
public:
    Agent(std::string id, AgentClass cls, SensorBinding sensors, std::vector<ActionGroup> groups, RewardParams reward,
          LearnerParams learner, std::uint64_t seed);

    const std::string& id() const { return id_; }
    AgentClass agent_class() const { return cls_; }
    const SensorBinding& sensors() const { return sensors_; }
    const std::vector<ActionGroup>& groups() const { return groups_; }
    const RewardParams& reward_params() const { return reward_; }
    const LearnerParams& learner_params() const { return learner_; }
    std::size_t step() const { return step_; }
    double epsilon() const { return epsilon_at(learner_, step_); }

    const QNetwork* network() const { return std::get_if<QNetwork>(&model_); }
    const TabularQ* table() const { return std::get_if<TabularQ>(&model_); }
    const ReplayBuffer& replay() const { return replay_; }

    /// Chooses one label per group for observation x and remembers (x, choice)
    /// for the next learn() call.
    ActionChoice act(std::span<const double> observation);

    /// Completes the pending transition with its reward and successor observation
    /// and runs one learning update. Returns the TD loss (0 when no update ran).
    double learn(double reward, std::span<const double> next_observation);

private:
    std::string id_;
    AgentClass cls_;
    SensorBinding sensors_;
    std::vector<ActionGroup> groups_;
    RewardParams reward_;
    LearnerParams learner_;
    Rng rng_;
    std::size_t step_ = 0;
    std::variant<QNetwork, TabularQ> model_;
    ReplayBuffer replay_;
    std::vector<double> pending_x_;
    ActionChoice pending_choice_;
    bool has_pending_ = false;
};

}  // namespace arl
