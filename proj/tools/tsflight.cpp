// Command-line front end: validate scenarios, plan trajectories, run the
// tracked simulation, and compare against the planar baselines.

#include <CLI11.hpp>

#include <exception>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <string>
#include <vector>

#include "tailsitter/harness.hpp"
#include "tailsitter/scenario.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitPlanner = 3;
constexpr int kExitTracking = 4;

using tailsitter::Scenario;

struct Invocation {
    std::string verb;
    std::string scenario_path;
    std::string out_dir;
};

int run_validate(const Invocation &inv) {
    const Scenario s = tailsitter::load_scenario(inv.scenario_path);
    std::vector<std::string> warnings;
    auto model = tailsitter::make_aero_model(s, &warnings);
    for (const auto &w : warnings) {
        std::cerr << "warning: " << w << "\n";
    }
    std::cout << "scenario '" << s.name << "' is valid ("
              << s.waypoints.size() << " waypoints, v_max " << s.plan.v_max << " m/s)\n";
    return kExitOk;
}

int run_plan_cmd(const Invocation &inv) {
    const Scenario s = tailsitter::load_scenario(inv.scenario_path);
    auto model = tailsitter::make_aero_model(s);
    const auto art = tailsitter::run_plan(s, *model, inv.out_dir);
    const auto &r = art.result;

    std::cout << "planned " << r.trajectory.segments() << " segments, total "
              << r.trajectory.total_duration() << " s, objective " << r.objective_value << "\n";
    std::cout << "wrote " << art.trajectory_json.string() << " and "
              << art.reference_csv.string() << "\n";
    if (!r.stall_warnings.empty()) {
        for (const auto &w : r.stall_warnings) {
            std::cerr << "stall warning at t=" << w.time << " s (|F|=" << w.residual
                      << "); consider lowering v_max\n";
        }
        return kExitPlanner;
    }
    if (r.optimizer_status == tailsitter::lbfgs::Status::LineSearchFailed) {
        std::cerr << "warning: time optimizer returned best-so-far after a line-search stall\n";
    }
    return kExitOk;
}

int run_track_cmd(const Invocation &inv) {
    const Scenario s = tailsitter::load_scenario(inv.scenario_path);
    auto model = tailsitter::make_aero_model(s);

    const std::filesystem::path traj_path = std::filesystem::path(inv.out_dir) / "trajectory.json";
    tailsitter::PlanResult plan_result;
    if (std::filesystem::exists(traj_path)) {
        std::ifstream in(traj_path);
        nlohmann::json j;
        in >> j;
        plan_result =
            tailsitter::resweep(tailsitter::PiecewiseTrajectory::from_json(j), s, *model);
    } else {
        std::cout << "no plan artifacts in " << inv.out_dir << "; planning first\n";
        plan_result = tailsitter::run_plan(s, *model, inv.out_dir).result;
    }
    if (!plan_result.stall_warnings.empty()) {
        std::cerr << "reference contains stall samples; aborting tracking\n";
        return kExitPlanner;
    }

    const auto track = tailsitter::run_track(s, plan_result, *model, inv.out_dir);
    const auto &m = track.metrics;
    std::cout << "tracked " << m.duration << " s: max error " << m.max_position_error
              << " m, rms " << m.rms_position_error << " m, peak |a| " << m.peak_acceleration
              << " m/s^2, peak |omega| " << m.peak_body_rate << " rad/s, bound violations "
              << m.input_bound_violations << "\n";
    std::cout << "wrote " << track.tracking_csv.string() << " and "
              << track.metrics_json.string() << "\n";
    if (m.diverged) {
        std::cerr << "simulation diverged; partial logs kept\n";
        return kExitTracking;
    }
    return kExitOk;
}

int run_compare_cmd(const Invocation &inv) {
    const Scenario s = tailsitter::load_scenario(inv.scenario_path);
    auto model = tailsitter::make_aero_model(s);
    const auto report = tailsitter::run_compare(s, *model, inv.out_dir);
    std::cout << "speed cap " << report.speed_cap << " m/s\n";
    for (const auto &r : report.methods) {
        std::cout << "  " << r.name << ": duration " << r.duration << " s, turn-rate jumps "
                  << r.discontinuities << " (max " << r.max_turn_rate_jump << " rad/s)"
                  << (r.finished ? "" : " [did not finish]") << "\n";
    }
    std::cout << "wrote " << report.report_json.string() << "\n";
    return kExitOk;
}

int dispatch(const Invocation &inv) {
    try {
        if (inv.verb == "validate") return run_validate(inv);
        if (inv.verb == "plan") return run_plan_cmd(inv);
        if (inv.verb == "track") return run_track_cmd(inv);
        return run_compare_cmd(inv);
    } catch (const tailsitter::ValidationError &e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const tailsitter::ParseError &e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const tailsitter::DivergenceError &e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return kExitTracking;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPlanner;
    }
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"tail-sitter trajectory optimization and tracking"};
    app.require_subcommand(1);

    std::vector<std::string> scenarios;
    std::string out_dir = "out";
    unsigned seed = 0;
    unsigned jobs = 1;

    auto add_common = [&](CLI::App *cmd) {
        cmd->add_option("--scenario", scenarios, "scenario JSON file(s)")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--seed", seed, "seed for randomized utilities");
        cmd->add_option("--jobs", jobs, "parallel scenario fan-out")->check(CLI::PositiveNumber);
    };

    add_common(app.add_subcommand("validate", "check a scenario file"));
    add_common(app.add_subcommand("plan", "generate trajectory and reference"));
    add_common(app.add_subcommand("track", "closed-loop tracking simulation"));
    add_common(app.add_subcommand("compare", "planar baseline comparison"));

    CLI11_PARSE(app, argc, argv);
    const std::string verb = app.get_subcommands().front()->get_name();

    std::vector<Invocation> invocations;
    for (const auto &path : scenarios) {
        Invocation inv;
        inv.verb = verb;
        inv.scenario_path = path;
        inv.out_dir = scenarios.size() == 1
                          ? out_dir
                          : (std::filesystem::path(out_dir) /
                             std::filesystem::path(path).stem().string())
                                .string();
        invocations.push_back(inv);
    }

    int worst = kExitOk;
    if (jobs <= 1 || invocations.size() <= 1) {
        for (const auto &inv : invocations) {
            worst = std::max(worst, dispatch(inv));
        }
    } else {
        std::vector<std::future<int>> futures;
        for (const auto &inv : invocations) {
            futures.push_back(std::async(std::launch::async, dispatch, inv));
        }
        for (auto &f : futures) {
            worst = std::max(worst, f.get());
        }
    }
    return worst;
}
