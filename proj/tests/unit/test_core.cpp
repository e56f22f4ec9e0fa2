#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "arl/core.hpp"
#include "arl/errors.hpp"
#include "arl/rng.hpp"
#include "test_support.hpp"

namespace {

using arl::ActionLabel;
using arl::ActuatorAction;
using arl::DeviceKind;
using arl::OperationalPhase;
using arl::PerformanceConfig;
using arl::PhaseSegment;
using arl::ResiliencePhase;

arl::PowerFlowSolution flat_solution(std::vector<double> v, bool converged = true) {
    arl::PowerFlowSolution sol;
    sol.theta_rad.assign(v.size(), 0.0);
    sol.p_inj_pu.assign(v.size(), 0.0);
    sol.q_inj_pu.assign(v.size(), 0.0);
    sol.v_pu = std::move(v);
    sol.converged = converged;
    sol.status = converged ? arl::SolverStatus::converged : arl::SolverStatus::diverged;
    return sol;
}

arl::SensorBinding all_buses() {
    arl::SensorBinding b;
    for (int i = 0; i < 14; ++i) b.sensors.push_back({i, arl::SensorQuantity::v_pu});
    return b;
}

// Every non-hold action on every actuator of the reference grid.
std::vector<ActuatorAction> single_device_actions(const arl::GridModel& grid) {
    std::vector<ActuatorAction> out;
    auto add = [&](DeviceKind kind, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            for (ActionLabel label : arl::default_labels(kind)) {
                if (label != ActionLabel::hold) out.push_back({{kind, static_cast<int>(i)}, label});
            }
        }
    };
    add(DeviceKind::transformer, grid.transformers.size());
    add(DeviceKind::generator, grid.generators.size());
    add(DeviceKind::load, grid.loads.size());
    return out;
}

int severity(OperationalPhase phase) {
    return static_cast<int>(phase);
}

}  // namespace

TEST(Observe, BaseCaseAllBuses) {
    const auto world = arl::WorldState::initial(arl::arl_poc_grid());
    const auto obs = arl::observe(world, all_buses());
    ASSERT_EQ(obs.values.size(), 14u);
    EXPECT_FALSE(obs.degraded);
    for (std::size_t i = 0; i < 14; ++i) {
        EXPECT_NEAR(obs.values[i], arl::testing::kBaseCaseVoltages[i], 1e-12);
        EXPECT_GE(obs.values[i], 0.95);
        EXPECT_LE(obs.values[i], 1.05);
    }
    EXPECT_EQ(arl::observe(world, all_buses()).values, obs.values);
}

TEST(Observe, SlackOnlyAndDegradedFlag) {
    auto world = arl::WorldState::initial(arl::arl_poc_grid());
    arl::SensorBinding slack;
    slack.sensors = {{0, arl::SensorQuantity::v_pu}};
    EXPECT_EQ(arl::observe(world, slack).values, std::vector<double>{1.02});

    world.solution.converged = false;
    const auto obs = arl::observe(world, slack);
    EXPECT_TRUE(obs.degraded);
    EXPECT_EQ(obs.values, std::vector<double>{1.02});
}

TEST(ApplyActions, HoldIsIdentity) {
    const auto world = arl::WorldState::initial(arl::arl_poc_grid());
    std::vector<ActuatorAction> holds;
    for (int i = 0; i < 6; ++i) holds.push_back({{DeviceKind::transformer, i}, ActionLabel::hold});
    for (int i = 0; i < 4; ++i) holds.push_back({{DeviceKind::generator, i}, ActionLabel::hold});
    for (int i = 0; i < 6; ++i) holds.push_back({{DeviceKind::load, i}, ActionLabel::hold});
    const auto next = arl::apply_actions(world, holds);
    EXPECT_EQ(next.t, 1u);
    EXPECT_EQ(next.grid, world.grid);
    EXPECT_EQ(next.solution, world.solution);
}

TEST(ApplyActions, TapUpOnFirstTransformerLowersItsLvBus) {
    const auto world = arl::WorldState::initial(arl::arl_poc_grid());
    ASSERT_EQ(world.grid.transformers[0].to_bus, 8);
    const std::vector<ActuatorAction> up{{{DeviceKind::transformer, 0}, ActionLabel::increment}};
    const auto next = arl::apply_actions(world, up);
    EXPECT_EQ(next.grid.transformers[0].tap_pos, 1);
    EXPECT_LT(next.solution.v_pu[8], world.solution.v_pu[8]);
}

TEST(ApplyActions, ClampsAtDeviceLimits) {
    arl::GridModel grid = arl::arl_poc_grid();
    grid.transformers[0].tap_pos = grid.transformers[0].tap_max;
    grid.loads[0].scaling = grid.loads[0].scaling_min;
    grid.generators[0].p_mw = grid.generators[0].p_max_mw;
    const auto world = arl::WorldState::initial(grid);
    const std::vector<ActuatorAction> acts{{{DeviceKind::transformer, 0}, ActionLabel::increment},
                                           {{DeviceKind::load, 0}, ActionLabel::decrement},
                                           {{DeviceKind::generator, 0}, ActionLabel::p_increment}};
    const auto next = arl::apply_actions(world, acts);
    EXPECT_EQ(next.grid, world.grid);
}

TEST(ApplyActions, RejectsDuplicateTargetsAndWrongLabels) {
    const auto world = arl::WorldState::initial(arl::arl_poc_grid());
    const std::vector<ActuatorAction> dup{{{DeviceKind::transformer, 3}, ActionLabel::increment},
                                          {{DeviceKind::transformer, 3}, ActionLabel::decrement}};
    EXPECT_THROW(arl::apply_actions(world, dup), arl::ConfigError);
    const std::vector<ActuatorAction> bad{{{DeviceKind::transformer, 0}, ActionLabel::q_increment}};
    EXPECT_THROW(arl::apply_actions(world, bad), arl::ContractError);
    const std::vector<ActuatorAction> missing{{{DeviceKind::load, 9}, ActionLabel::hold}};
    EXPECT_THROW(arl::apply_actions(world, missing), arl::ContractError);
}

TEST(ApplyActions, DisjointActionsCommuteExhaustively) {
    const auto world = arl::WorldState::initial(arl::arl_poc_grid());
    const auto actions = single_device_actions(world.grid);
    ASSERT_EQ(actions.size(), 6u * 2 + 4u * 4 + 6u * 2);
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < actions.size(); ++i) {
        for (std::size_t j = i + 1; j < actions.size(); ++j) {
            if (actions[i].target == actions[j].target) continue;
            const std::vector<ActuatorAction> a{actions[i]};
            const std::vector<ActuatorAction> b{actions[j]};
            const auto ab = arl::apply_actions(arl::apply_actions(world, a), b);
            const auto ba = arl::apply_actions(arl::apply_actions(world, b), a);
            ASSERT_EQ(ab.grid, ba.grid) << arl::to_string(actions[i].target) << " / " << arl::to_string(actions[j].target);
            ASSERT_EQ(ab.solution, ba.solution);
            ASSERT_EQ(ab.t, ba.t);
            const std::vector<ActuatorAction> joint_ab{actions[i], actions[j]};
            const std::vector<ActuatorAction> joint_ba{actions[j], actions[i]};
            ASSERT_EQ(arl::apply_actions(world, joint_ab).solution, arl::apply_actions(world, joint_ba).solution);
            ++pairs;
        }
    }
    EXPECT_GT(pairs, 700u);
}

TEST(Settings, RoundTripThroughGrid) {
    arl::Rng rng(3);
    const arl::GridModel grid = arl::testing::random_operating_point(rng);
    const auto s = arl::settings_of(grid);
    EXPECT_EQ(arl::with_settings(arl::arl_poc_grid(), s), grid);
}

TEST(Performance, FormulaExamples) {
    const PerformanceConfig cfg;
    EXPECT_EQ(arl::system_performance(flat_solution(std::vector<double>(14, 1.0)), cfg), 1.0);
    std::vector<double> v(14, 1.0);
    v[5] = 1.1;
    EXPECT_NEAR(arl::system_performance(flat_solution(v), cfg), 13.0 / 14.0, 1e-12);
    EXPECT_EQ(arl::system_performance(flat_solution(std::vector<double>(14, 1.0), false), cfg), 0.0);
    v[5] = 1.3;  // beyond the band contributes 0, not a negative term
    EXPECT_NEAR(arl::system_performance(flat_solution(v), cfg), 13.0 / 14.0, 1e-12);
}

TEST(Performance, AttackSuccess) {
    const PerformanceConfig cfg;
    EXPECT_FALSE(arl::attack_successful(arl::WorldState::initial(arl::arl_poc_grid()), cfg));
    std::vector<double> v(14, 1.0);
    v[9] = 1.11;
    EXPECT_TRUE(arl::attack_successful(flat_solution(v), cfg));
    v[9] = 1.1;
    EXPECT_FALSE(arl::attack_successful(flat_solution(v), cfg));
    EXPECT_TRUE(arl::attack_successful(flat_solution(std::vector<double>(14, 1.0), false), cfg));
}

TEST(Performance, ConfigBounds) {
    PerformanceConfig cfg;
    EXPECT_NO_THROW(arl::validate(cfg));
    cfg.v_hi = 1.0;
    EXPECT_THROW(arl::validate(cfg), arl::ConfigError);
    cfg = PerformanceConfig{};
    cfg.p_fail = 1.5;
    EXPECT_THROW(arl::validate(cfg), arl::ConfigError);
}

TEST(OperationalPhase, Examples) {
    const PerformanceConfig cfg;
    EXPECT_EQ(arl::classify_operational_phase(arl::WorldState::initial(arl::arl_poc_grid()), cfg),
              OperationalPhase::normal);
    std::vector<double> v(14, 1.0);
    v[3] = 1.07;
    EXPECT_EQ(arl::classify_operational_phase(flat_solution(v), cfg), OperationalPhase::alert);
    v[3] = 0.85;
    EXPECT_EQ(arl::classify_operational_phase(flat_solution(v), cfg), OperationalPhase::emergency);
    EXPECT_EQ(arl::classify_operational_phase(flat_solution(v, false), cfg), OperationalPhase::blackout);
}

TEST(OperationalPhase, MonotoneInViolationSeverity) {
    const PerformanceConfig cfg;
    arl::Rng rng(11);
    for (int trial = 0; trial < 2000; ++trial) {
        std::vector<double> v(14);
        for (auto& x : v) x = arl::uniform(rng, 0.85, 1.15);
        const auto before = arl::classify_operational_phase(flat_solution(v), cfg);
        const std::size_t bus = arl::uniform_index(rng, 14);
        const double push = arl::uniform(rng, 0.0, 0.1);
        v[bus] += v[bus] >= 1.0 ? push : -push;
        const auto after = arl::classify_operational_phase(flat_solution(v), cfg);
        ASSERT_GE(severity(after), severity(before)) << "trial " << trial;
    }
}

TEST(Asymmetry, ConstructedSeries) {
    const std::vector<double> constant(20, 1.0);
    auto r = arl::check_asymmetry(constant, 0.5, 0);
    EXPECT_TRUE(r.holds);
    EXPECT_FALSE(r.first_violation.has_value());

    std::vector<double> dip(20, 1.0);
    dip[7] = 0.4;
    r = arl::check_asymmetry(dip, 0.5, 0);
    EXPECT_FALSE(r.holds);
    ASSERT_TRUE(r.first_violation.has_value());
    EXPECT_EQ(*r.first_violation, 7u);
    EXPECT_TRUE(arl::check_asymmetry(dip, 0.5, 7).holds);

    std::vector<double> at_threshold(5, 1.0);
    at_threshold[3] = 0.5;  // strict inequality
    EXPECT_EQ(arl::check_asymmetry(at_threshold, 0.5, 0).first_violation, std::optional<std::size_t>(3));
    EXPECT_THROW(arl::check_asymmetry(constant, 0.5, 20), arl::ContractError);
}

TEST(Asymmetry, LastStepIsVacuouslyTrue) {
    arl::Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> p(1 + arl::uniform_index(rng, 50));
        for (auto& x : p) x = arl::uniform01(rng);
        EXPECT_TRUE(arl::check_asymmetry(p, 0.9, p.size() - 1).holds);
    }
}

TEST(Resilience, ConstantSeriesIsOnePlanSegment) {
    const std::vector<double> p(12, 1.0);
    const auto seg = arl::classify_resilience_phases(p, PerformanceConfig{});
    ASSERT_EQ(seg.size(), 1u);
    EXPECT_EQ(seg[0], (PhaseSegment{ResiliencePhase::plan, 0, 11, 0}));
}

TEST(Resilience, VShapeRunsThroughAllFourPhases) {
    const std::vector<double> p{1.0, 1.0, 0.8, 0.6, 0.4, 0.6, 0.8, 1.0, 1.0};
    const auto seg = arl::classify_resilience_phases(p, PerformanceConfig{});
    const std::vector<PhaseSegment> expected{{ResiliencePhase::plan, 0, 1, 0},
                                             {ResiliencePhase::absorb, 2, 4, 1},
                                             {ResiliencePhase::recover, 5, 6, 1},
                                             {ResiliencePhase::adapt, 7, 8, 1}};
    EXPECT_EQ(seg, expected);
}

TEST(Resilience, DoubleDipSecondEventStaysAboveFailure) {
    const PerformanceConfig cfg{1.0, 0.5, 0.9, 1.1};
    const std::vector<double> p{1.0, 1.0, 0.7, 0.3, 0.6, 1.0, 1.0, 0.9, 0.8, 0.9, 1.0};
    const auto seg = arl::classify_resilience_phases(p, cfg);
    const std::vector<PhaseSegment> expected{
        {ResiliencePhase::plan, 0, 1, 0},   {ResiliencePhase::absorb, 2, 3, 1}, {ResiliencePhase::recover, 4, 4, 1},
        {ResiliencePhase::adapt, 5, 6, 1},  {ResiliencePhase::absorb, 7, 8, 2}, {ResiliencePhase::recover, 9, 9, 2},
        {ResiliencePhase::adapt, 10, 10, 2}};
    EXPECT_EQ(seg, expected);

    const auto failures = arl::failure_intervals(p, cfg.p_fail);
    ASSERT_EQ(failures.size(), 1u);
    EXPECT_EQ(failures[0], (arl::Interval{3, 3}));
    for (const auto& f : failures) {
        EXPECT_LT(f.end, 7u) << "second event must not contain a failure interval";
    }
}

TEST(Resilience, PartialRecoveryFallsBackToAbsorb) {
    const std::vector<double> p{1.0, 0.5, 0.7, 0.6, 1.0};
    const auto seg = arl::classify_resilience_phases(p, PerformanceConfig{});
    const std::vector<PhaseSegment> expected{{ResiliencePhase::plan, 0, 0, 0},
                                             {ResiliencePhase::absorb, 1, 1, 1},
                                             {ResiliencePhase::recover, 2, 2, 1},
                                             {ResiliencePhase::absorb, 3, 3, 1},
                                             {ResiliencePhase::adapt, 4, 4, 1}};
    EXPECT_EQ(seg, expected);
    EXPECT_THROW(arl::classify_resilience_phases(std::vector<double>{}, PerformanceConfig{}), arl::ContractError);
}
