#include "arl/agents.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "arl/errors.hpp"

namespace arl {

// ---------------------------------------------------------------------------
// Reward curve

double RewardParams::default_offset(double sigma, double deviation) {
    return std::exp(-(deviation * deviation) / (2.0 * sigma * sigma));
}

void validate(const RewardParams& params) {
    if (!(params.sigma > 0.0)) {
        throw ConfigError("reward.sigma must be > 0");
    }
    if (!(params.c > 0.0 && params.c < 1.0)) {
        throw ConfigError("reward.c must lie in (0, 1)");
    }
}

double reward(const RewardParams& params, double x_mean) {
    const double d = x_mean - params.mu;
    const double curve = std::exp(-(d * d) / (2.0 * params.sigma * params.sigma)) - params.c;
    return params.cls == AgentClass::attacker ? -curve : curve;
}

double reward_boundary(const RewardParams& params) {
    return params.sigma * std::sqrt(-2.0 * std::log(params.c));
}

double mean(std::span<const double> values) {
    if (values.empty()) {
        return 0.0;
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

// ---------------------------------------------------------------------------
// Action groups

std::size_t ActionGroup::hold_index() const {
    const auto it = std::find(labels.begin(), labels.end(), ActionLabel::hold);
    return static_cast<std::size_t>(it - labels.begin());
}

void validate(const ActionGroup& group) {
    const std::string where = "actuator " + to_string(group.actuator);
    if (group.labels.size() < 2) {
        throw ConfigError(where + ": needs at least 2 labels");
    }
    std::set<ActionLabel> distinct(group.labels.begin(), group.labels.end());
    if (distinct.size() != group.labels.size()) {
        throw ConfigError(where + ": duplicate labels");
    }
    if (!distinct.contains(ActionLabel::hold)) {
        throw ConfigError(where + ": labels must include 'hold'");
    }
    for (ActionLabel label : group.labels) {
        if (!label_valid_for(group.actuator.kind, label)) {
            throw ConfigError(where + ": label '" + to_string(label) + "' is not valid for a " +
                              to_string(group.actuator.kind));
        }
    }
}

std::vector<std::size_t> group_sizes(std::span<const ActionGroup> groups) {
    std::vector<std::size_t> sizes;
    sizes.reserve(groups.size());
    for (const ActionGroup& g : groups) sizes.push_back(g.labels.size());
    return sizes;
}

std::vector<ActuatorAction> to_actions(std::span<const ActionGroup> groups, const ActionChoice& choice) {
    if (choice.size() != groups.size()) {
        throw ContractError("one label per action group expected");
    }
    std::vector<ActuatorAction> actions;
    actions.reserve(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        actions.push_back({groups[g].actuator, groups[g].labels.at(choice[g])});
    }
    return actions;
}

// ---------------------------------------------------------------------------
// Q-network

namespace {

Eigen::VectorXd activate(const Eigen::VectorXd& z, Activation act) {
    return act == Activation::tanh ? Eigen::VectorXd(z.array().tanh()) : z;
}

std::vector<std::size_t> offsets_of(const std::vector<std::size_t>& groups) {
    std::vector<std::size_t> offsets(groups.size());
    std::exclusive_scan(groups.begin(), groups.end(), offsets.begin(), std::size_t{0});
    return offsets;
}

void check_layout(std::span<const std::size_t> layer_sizes, const std::vector<std::size_t>& groups) {
    if (layer_sizes.size() < 2) {
        throw ContractError("network needs at least an input and an output layer");
    }
    if (std::accumulate(groups.begin(), groups.end(), std::size_t{0}) != layer_sizes.back()) {
        throw ContractError("output size must equal the sum of group sizes");
    }
}

// Activations of every layer for one input; acts[0] is the input itself.
std::vector<Eigen::VectorXd> forward_all(const QNetwork& net, const Eigen::VectorXd& x) {
    std::vector<Eigen::VectorXd> acts;
    acts.reserve(net.weights.size() + 1);
    acts.push_back(x);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        Eigen::VectorXd z = net.weights[l] * acts.back() + net.biases[l];
        const bool last = l + 1 == net.weights.size();
        acts.push_back(last ? z : activate(z, net.hidden));
    }
    return acts;
}

}  // namespace

std::size_t QNetwork::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    }
    return n;
}

bool QNetwork::all_finite() const {
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (!weights[l].allFinite() || !biases[l].allFinite()) {
            return false;
        }
    }
    return true;
}

QNetwork QNetwork::zeros(std::span<const std::size_t> layer_sizes, std::vector<std::size_t> groups) {
    check_layout(layer_sizes, groups);
    QNetwork net;
    net.groups = std::move(groups);
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const auto in = static_cast<Eigen::Index>(layer_sizes[l]);
        const auto out = static_cast<Eigen::Index>(layer_sizes[l + 1]);
        net.weights.push_back(Eigen::MatrixXd::Zero(out, in));
        net.biases.push_back(Eigen::VectorXd::Zero(out));
    }
    return net;
}

QNetwork QNetwork::random(std::span<const std::size_t> layer_sizes, std::vector<std::size_t> groups, Rng& rng,
                          double scale) {
    QNetwork net = zeros(layer_sizes, std::move(groups));
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        // Column-major fill order is part of the reproducibility contract.
        for (Eigen::Index c = 0; c < net.weights[l].cols(); ++c) {
            for (Eigen::Index r = 0; r < net.weights[l].rows(); ++r) {
                net.weights[l](r, c) = uniform(rng, -scale, scale);
            }
        }
        for (Eigen::Index r = 0; r < net.biases[l].size(); ++r) {
            net.biases[l](r) = uniform(rng, -scale, scale);
        }
    }
    return net;
}

std::span<const double> QValues::group(std::size_t g) const {
    const std::size_t begin = offsets.at(g);
    const std::size_t end = g + 1 < offsets.size() ? offsets[g + 1] : static_cast<std::size_t>(all.size());
    return {all.data() + begin, end - begin};
}

QValues forward(const QNetwork& net, const Eigen::VectorXd& x) {
    if (net.weights.empty() || static_cast<std::size_t>(x.size()) != net.input_size()) {
        throw ContractError("network input has " + std::to_string(x.size()) + " entries, expected " +
                            std::to_string(net.weights.empty() ? 0 : net.input_size()));
    }
    QValues q;
    q.all = forward_all(net, x).back();
    q.offsets = offsets_of(net.groups);
    return q;
}

std::size_t argmax(std::span<const double> values) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) {
            best = i;
        }
    }
    return best;
}

ActionChoice select_actions(const QNetwork& net, const Eigen::VectorXd& x, double epsilon, Rng& rng) {
    const QValues q = forward(net, x);
    ActionChoice choice(q.group_count());
    for (std::size_t g = 0; g < q.group_count(); ++g) {
        const auto values = q.group(g);
        // Always draw so the rng stream does not depend on epsilon.
        const double u = uniform01(rng);
        const std::size_t random_label = uniform_index(rng, values.size());
        choice[g] = u < epsilon ? random_label : argmax(values);
    }
    return choice;
}

TdTargets compute_td_targets(const QNetwork& net, std::span<const Transition> batch, double gamma) {
    TdTargets targets;
    targets.reserve(batch.size());
    for (const Transition& tr : batch) {
        const QValues next = forward(net, tr.x_next);
        std::vector<double> per_group(next.group_count());
        for (std::size_t g = 0; g < next.group_count(); ++g) {
            const auto values = next.group(g);
            per_group[g] = tr.reward + gamma * *std::max_element(values.begin(), values.end());
        }
        targets.push_back(std::move(per_group));
    }
    return targets;
}

double td_loss(const QNetwork& net, std::span<const Transition> batch, const TdTargets& targets) {
    double loss = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const QValues q = forward(net, batch[b].x);
        for (std::size_t g = 0; g < q.group_count(); ++g) {
            const double err = q.group(g)[batch[b].actions[g]] - targets[b][g];
            loss += err * err;
        }
    }
    return batch.empty() ? 0.0 : loss / static_cast<double>(batch.size());
}

NetworkGradient td_loss_gradient(const QNetwork& net, std::span<const Transition> batch, const TdTargets& targets) {
    NetworkGradient grad;
    const std::size_t layers = net.weights.size();
    for (std::size_t l = 0; l < layers; ++l) {
        grad.weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        grad.biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    if (batch.empty()) {
        return grad;
    }
    const double scale = 1.0 / static_cast<double>(batch.size());
    const auto offsets = offsets_of(net.groups);

    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto acts = forward_all(net, batch[b].x);
        const Eigen::VectorXd& q = acts.back();
        Eigen::VectorXd delta = Eigen::VectorXd::Zero(q.size());
        for (std::size_t g = 0; g < offsets.size(); ++g) {
            const auto idx = static_cast<Eigen::Index>(offsets[g] + batch[b].actions[g]);
            const double err = q(idx) - targets[b][g];
            grad.loss += scale * err * err;
            delta(idx) += 2.0 * scale * err;
        }
        for (std::size_t l = layers; l-- > 0;) {
            grad.weights[l].noalias() += delta * acts[l].transpose();
            grad.biases[l] += delta;
            if (l > 0) {
                Eigen::VectorXd back = net.weights[l].transpose() * delta;
                if (net.hidden == Activation::tanh) {
                    back.array() *= 1.0 - acts[l].array().square();
                }
                delta = std::move(back);
            }
        }
    }
    return grad;
}

double td_update(QNetwork& net, std::span<const Transition> batch, double gamma, double learning_rate) {
    const TdTargets targets = compute_td_targets(net, batch, gamma);
    const NetworkGradient grad = td_loss_gradient(net, batch, targets);
    if (!std::isfinite(grad.loss)) {
        throw DivergenceError("TD loss became non-finite");
    }
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        net.weights[l] -= learning_rate * grad.weights[l];
        net.biases[l] -= learning_rate * grad.biases[l];
    }
    if (!net.all_finite()) {
        throw DivergenceError("network weights became non-finite after a TD update");
    }
    return grad.loss;
}

// ---------------------------------------------------------------------------
// Experience replay

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) {
        throw ContractError("replay capacity must be > 0");
    }
    items_.reserve(capacity_);
}

void ReplayBuffer::push(Transition transition) {
    if (items_.size() < capacity_) {
        items_.push_back(std::move(transition));
    } else {
        items_[next_] = std::move(transition);
    }
    next_ = (next_ + 1) % capacity_;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
    if (items_.empty()) {
        throw ContractError("cannot sample from an empty replay buffer");
    }
    std::vector<Transition> batch;
    batch.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
        batch.push_back(items_[uniform_index(rng, items_.size())]);
    }
    return batch;
}

// ---------------------------------------------------------------------------
// Learners

const char* to_string(LearnerKind kind) {
    return kind == LearnerKind::qnet ? "qnet" : "tabular";
}

LearnerKind learner_kind_from_string(const std::string& text) {
    if (text == "qnet") return LearnerKind::qnet;
    if (text == "tabular") return LearnerKind::tabular;
    throw ConfigError("unknown learner kind '" + text + "'");
}

LearnerParams LearnerParams::defaults(LearnerKind kind) {
    LearnerParams p;
    p.kind = kind;
    if (kind == LearnerKind::tabular) {
        p.learning_rate = 0.1;
    }
    return p;
}

void validate(const LearnerParams& p) {
    if (!(p.gamma >= 0.0 && p.gamma < 1.0)) throw ConfigError("learner.gamma must lie in [0, 1)");
    if (!(p.learning_rate >= 0.0)) throw ConfigError("learner.learning_rate must be >= 0");
    if (!(p.epsilon_start >= 0.0 && p.epsilon_start <= 1.0 && p.epsilon_end >= 0.0 && p.epsilon_end <= 1.0)) {
        throw ConfigError("learner.epsilon_start and epsilon_end must lie in [0, 1]");
    }
    if (p.kind == LearnerKind::qnet) {
        if (p.hidden == 0) throw ConfigError("learner.hidden must be > 0");
        if (p.replay_capacity == 0) throw ConfigError("learner.replay_capacity must be > 0");
        if (p.batch_size == 0 || p.batch_size > p.replay_capacity) {
            throw ConfigError("learner.batch_size must lie in [1, replay_capacity]");
        }
        if (!(p.init_scale >= 0.0)) throw ConfigError("learner.init_scale must be >= 0");
    } else {
        if (p.bins == 0) throw ConfigError("learner.bins must be > 0");
        if (!(p.bin_lo < p.bin_hi)) throw ConfigError("learner.bin_lo must be < bin_hi");
    }
}

double epsilon_at(const LearnerParams& params, std::size_t step) {
    if (params.epsilon_decay_steps == 0 || step >= params.epsilon_decay_steps) {
        return params.epsilon_end;
    }
    const double frac = static_cast<double>(step) / static_cast<double>(params.epsilon_decay_steps);
    return params.epsilon_start + (params.epsilon_end - params.epsilon_start) * frac;
}

TabularQ::TabularQ(std::size_t states, std::vector<std::size_t> groups)
    : states_(states), groups_(std::move(groups)), offsets_(offsets_of(groups_)),
      width_(std::accumulate(groups_.begin(), groups_.end(), std::size_t{0})), table_(states_ * width_, 0.0) {}

std::span<const double> TabularQ::row(std::size_t state) const {
    return {table_.data() + state * width_, width_};
}

double TabularQ::value(std::size_t state, std::size_t group, std::size_t label) const {
    return table_.at(state * width_ + offsets_.at(group) + label);
}

ActionChoice TabularQ::greedy(std::size_t state) const {
    const auto r = row(state);
    ActionChoice choice(groups_.size());
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        choice[g] = argmax(r.subspan(offsets_[g], groups_[g]));
    }
    return choice;
}

ActionChoice TabularQ::select(std::size_t state, double epsilon, Rng& rng) const {
    ActionChoice choice = greedy(state);
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        const double u = uniform01(rng);
        const std::size_t random_label = uniform_index(rng, groups_[g]);
        if (u < epsilon) {
            choice[g] = random_label;
        }
    }
    return choice;
}

void TabularQ::update(std::size_t state, const ActionChoice& actions, double reward, std::size_t next_state,
                      double alpha, double gamma) {
    const auto next = row(next_state);
    for (std::size_t g = 0; g < groups_.size(); ++g) {
        const auto next_group = next.subspan(offsets_[g], groups_[g]);
        const double best_next = *std::max_element(next_group.begin(), next_group.end());
        double& q = table_[state * width_ + offsets_[g] + actions[g]];
        q += alpha * (reward + gamma * best_next - q);
    }
}

std::size_t discretize(double x_mean, const LearnerParams& params) {
    const double width = (params.bin_hi - params.bin_lo) / static_cast<double>(params.bins);
    const double pos = std::floor((x_mean - params.bin_lo) / width);
    if (!(pos > 0.0)) {
        return 0;
    }
    return std::min(static_cast<std::size_t>(pos), params.bins - 1);
}

// ---------------------------------------------------------------------------
// Agent instance

namespace {

constexpr double kFeatureScale = 10.0;

}  // namespace

Eigen::VectorXd to_features(std::span<const double> observation) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(observation.size()));
    for (std::size_t i = 0; i < observation.size(); ++i) {
        x(static_cast<Eigen::Index>(i)) = (observation[i] - 1.0) * kFeatureScale;
    }
    return x;
}

Agent::Agent(std::string id, AgentClass cls, SensorBinding sensors, std::vector<ActionGroup> groups,
             RewardParams reward, LearnerParams learner, std::uint64_t seed)
    : id_(std::move(id)), cls_(cls), sensors_(std::move(sensors)), groups_(std::move(groups)),
      reward_(reward), learner_(learner), rng_(seed),
      model_(TabularQ(1, {1})), replay_(learner.kind == LearnerKind::qnet ? learner.replay_capacity : 1) {
    reward_.cls = cls_;
    validate(reward_);
    validate(learner_);
    if (sensors_.sensors.empty()) {
        throw ConfigError("agent '" + id_ + "' needs at least one sensor");
    }
    if (groups_.empty()) {
        throw ConfigError("agent '" + id_ + "' needs at least one actuator");
    }
    for (const ActionGroup& g : groups_) validate(g);

    const auto sizes = group_sizes(groups_);
    if (learner_.kind == LearnerKind::qnet) {
        const std::size_t n_out = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
        const std::vector<std::size_t> layers{sensors_.sensors.size(), learner_.hidden, n_out};
        model_ = QNetwork::random(layers, sizes, rng_, learner_.init_scale);
    } else {
        model_ = TabularQ(learner_.bins, sizes);
    }
}

ActionChoice Agent::act(std::span<const double> observation) {
    if (observation.size() != sensors_.sensors.size()) {
        throw ContractError("agent '" + id_ + "' expects " + std::to_string(sensors_.sensors.size()) + " inputs");
    }
    const double eps = epsilon();
    ActionChoice choice;
    if (const auto* net = std::get_if<QNetwork>(&model_)) {
        choice = select_actions(*net, to_features(observation), eps, rng_);
    } else {
        const auto& table = std::get<TabularQ>(model_);
        choice = table.select(discretize(mean(observation), learner_), eps, rng_);
    }
    pending_x_.assign(observation.begin(), observation.end());
    pending_choice_ = choice;
    has_pending_ = true;
    ++step_;
    return choice;
}

double Agent::learn(double reward, std::span<const double> next_observation) {
    if (!has_pending_) {
        throw ContractError("agent '" + id_ + "' has no pending action to learn from");
    }
    has_pending_ = false;
    if (auto* net = std::get_if<QNetwork>(&model_)) {
        replay_.push({to_features(pending_x_), pending_choice_, reward, to_features(next_observation)});
        if (replay_.size() < learner_.batch_size) {
            return 0.0;
        }
        const auto batch = replay_.sample(learner_.batch_size, rng_);
        try {
            return td_update(*net, batch, learner_.gamma, learner_.learning_rate);
        } catch (const DivergenceError& e) {
            throw DivergenceError("agent '" + id_ + "' at step " + std::to_string(step_) + ": " + e.what());
        }
    }
    auto& table = std::get<TabularQ>(model_);
    table.update(discretize(mean(pending_x_), learner_), pending_choice_, reward,
                 discretize(mean(next_observation), learner_), learner_.learning_rate, learner_.gamma);
    return 0.0;
}

}  // namespace arl
