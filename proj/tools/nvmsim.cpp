// nvmsim: run, compare and sweep the de-stress scheduling policies.

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include "nvmsim/nvmsim.hpp"

using namespace nvmsim;

namespace {

enum ExitCode { kOk = 0, kSimFailure = 1, kUsage = 2 };

struct Flags {
    std::string config;
    std::vector<std::string> overrides;
    std::string output;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> policy;
    std::string action_log;
    std::string format;
    std::optional<unsigned> jobs;
    std::string axis;
    std::string values;
    std::optional<double> target_years;
    std::string trace;
};

Settings build_settings(const Flags& f) {
    Settings s;
    std::string path = f.config;
    if (path.empty())
        if (const char* env = std::getenv("NVMSIM_CONFIG"); env && *env) path = env;
    if (!path.empty()) load_config_file(s, path);
    for (const auto& o : f.overrides) apply_override(s, o);
    // dedicated flags win over both the file and --set
    if (f.seed) s.sim.workload.seed = *f.seed;
    if (f.policy) s.sim.scheduler.policy = parse_policy(*f.policy);
    if (!f.output.empty()) s.output = f.output;
    if (!f.action_log.empty()) s.action_log = f.action_log;
    if (!f.format.empty()) set_value(s, "output.format", f.format);
    if (f.jobs) s.jobs = *f.jobs;
    if (!f.axis.empty()) s.sweep_axis = f.axis;
    if (!f.values.empty()) set_value(s, "sweep.values", f.values);
    if (f.target_years) s.calibration.target_mttf_years = *f.target_years;
    if (!f.trace.empty()) s.sim.trace_path = f.trace;
    return s;
}

/// Writes to a file, or to stdout for "-".
class Output {
  public:
    explicit Output(const std::string& path) {
        if (path.empty() || path == "-") return;
        file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
        if (!*file_) throw Error("cannot open output file '" + path + "'");
        path_ = path;
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }
    void close() {
        if (!file_) {
            std::cout.flush();
            return;
        }
        file_->close();
        if (!*file_) throw Error("error writing '" + path_ + "'");
    }
    bool is_stdout() const { return !file_; }

  private:
    std::unique_ptr<std::ofstream> file_;
    std::string path_;
};

/// Run `jobs` in a pool of `workers` threads; results keep job order.
template <class Job>
auto run_parallel(const std::vector<Job>& jobs, unsigned workers) {
    using Result = decltype(jobs.front()());
    std::vector<std::optional<Result>> results(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < jobs.size();) {
            try {
                results[i] = jobs[i]();
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const unsigned n = std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(jobs.size(), 1)));
    for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<Result> out;
    out.reserve(results.size());
    for (auto& r : results) out.push_back(std::move(*r));
    return out;
}

ReportRow simulate(const SimConfig& cfg) { return make_report_row(run(cfg), cfg.aging, cfg.recovery); }

int cmd_run(const Settings& s) {
    SimConfig cfg = resolve(s);
    cfg.record_actions = !s.action_log.empty();
    const SimStats stats = run(cfg);
    const ReportRow row = make_report_row(stats, cfg.aging, cfg.recovery);
    Output out(s.output);
    if (s.format == "text")
        write_report_text(out.stream(), row);
    else
        write_report_csv(out.stream(), {row});
    out.close();
    if (!s.action_log.empty()) {
        Output log(s.action_log);
        write_action_log(log.stream(), stats.actions);
        log.close();
    }
    return kOk;
}

int cmd_compare(const Settings& s) {
    const SimConfig base = resolve(s);
    std::vector<std::function<ReportRow()>> jobs;
    for (Policy p : s.policies) {
        SimConfig cfg = base;
        cfg.scheduler.policy = p;
        jobs.push_back([cfg] { return simulate(cfg); });
    }
    const auto rows = run_parallel(jobs, worker_count(s.jobs));
    Output out(s.output);
    write_compare_csv(out.stream(), rows);
    out.close();
    return kOk;
}

int cmd_sweep(const Settings& s) {
    if (s.sweep_values.empty()) throw ConfigError("sweep: the value list is empty");
    const std::string key = sweep_key(s.sweep_axis);
    std::vector<std::function<ReportRow()>> jobs;
    std::vector<std::string> labels;
    for (double v : s.sweep_values) {
        for (Policy p : s.policies) {
            Settings point = s;
            set_value(point, key, format_number(v));
            point.sim.scheduler.policy = p;
            const SimConfig cfg = resolve(point);
            jobs.push_back([cfg] { return simulate(cfg); });
            labels.push_back(format_number(v));
        }
    }
    const auto rows = run_parallel(jobs, worker_count(s.jobs));
    Output out(s.output);
    out.stream() << "axis,value," << kReportHeader << '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.stream() << csv_field(s.sweep_axis) << ',' << labels[i] << ',';
        write_report_row(out.stream(), rows[i]);
        out.stream() << '\n';
    }
    out.close();
    return kOk;
}

int cmd_gen_trace(const Settings& s) {
    s.sim.workload.validate();
    auto trace = generate(s.sim.workload, s.sim.geometry);
    if (s.sim.write_cache_hit_rate > 0) trace = write_cache_filter(trace, s.sim.write_cache_hit_rate, s.sim.workload.seed);
    if (s.output.empty() || s.output == "-") {
        write_trace(std::cout, trace);
        std::cout.flush();
    } else {
        write_trace_file(s.output, trace);
    }
    return kOk;
}

int cmd_calibrate(const Settings& s) {
    Settings cal = s;
    cal.sim.aging = calibrated_aging(s);
    cal.auto_material = false;
    const BaselineProfile prof = calibration_profile(cal);
    AgingParams at_ref = cal.sim.aging;
    at_ref.temperature = cal.calibration.temperature;
    const double closed_form = ns_to_years(profile_mttf(prof, cal.sim.voltages, at_ref, cal.sim.recovery));
    const SimStats verify = calibration_run(cal);
    const double simulated = ns_to_years(estimate_mttf(verify, at_ref, cal.sim.recovery));

    Output out(s.output);
    write_config(out.stream(), cal);
    out.close();
    std::ostream& msg = out.is_stdout() ? std::cerr : std::cout;
    msg << "aging.A = " << format_number(cal.sim.aging.material_constant) << '\n'
        << "target MTTF " << format_number(cal.calibration.target_mttf_years) << " years at "
        << format_number(cal.calibration.temperature) << " K\n"
        << "closed-form MTTF " << format_number(closed_form) << " years\n"
        << "verify-run MTTF  " << format_number(simulated) << " years\n";
    return kOk;
}

std::string schema_help() {
    std::ostringstream os;
    os << "\nConfig keys (config file, --set key=value):\n";
    for (const auto& k : schema()) {
        os << "  " << k.key;
        os << std::string(k.key.size() < 34 ? 34 - k.key.size() : 1, ' ') << k.type << "  " << k.doc << '\n';
    }
    os << "\nFlag equivalents: --seed workload.seed, --policy scheduler.policy, -o output.path,\n"
          "--format output.format, --action-log sim.action_log, --jobs sweep.jobs, --axis sweep.axis,\n"
          "--values sweep.values, --target-years calibration.target_mttf_years, --trace workload.trace.\n"
          "Precedence: flags, then --set, then the config file, then built-in defaults.\n"
          "NVMSIM_CONFIG names the config file when --config is absent.\n"
          "Exit status: 0 success, 1 simulation failure, 2 usage or config error.\n";
    return os.str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trace-driven PCM simulator with BTI aging of the peripheral circuits"};
    app.footer(schema_help());
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    Flags f;
    auto common = [&f](CLI::App* sub) {
        sub->add_option("-c,--config", f.config, "Config file");
        sub->add_option("--set", f.overrides, "Override a config key (key=value), repeatable");
        sub->add_option("-o,--output", f.output, "Output path, '-' for stdout");
        sub->add_option("--seed", f.seed, "Workload seed");
        sub->add_option("--trace", f.trace, "Trace file to replay");
    };

    auto* run_cmd = app.add_subcommand("run", "Run one simulation and report it");
    common(run_cmd);
    run_cmd->add_option("--policy", f.policy, "baseline, laser or decoupled-laser");
    run_cmd->add_option("--format", f.format, "csv or text");
    run_cmd->add_option("--action-log", f.action_log, "Write the controller action log here");

    auto* compare_cmd = app.add_subcommand("compare", "Run every policy on one workload");
    common(compare_cmd);
    compare_cmd->add_option("--jobs", f.jobs, "Parallel workers");

    auto* sweep_cmd = app.add_subcommand("sweep", "Sweep one parameter for every policy");
    common(sweep_cmd);
    sweep_cmd->add_option("--axis", f.axis, "th_aging, tDSI, temperature or a config key");
    sweep_cmd->add_option("--values", f.values, "Comma-separated values");
    sweep_cmd->add_option("--jobs", f.jobs, "Parallel workers");

    auto* gen_cmd = app.add_subcommand("gen-trace", "Write a synthetic trace");
    common(gen_cmd);

    auto* cal_cmd = app.add_subcommand("calibrate", "Solve the material constant and write the config");
    common(cal_cmd);
    cal_cmd->add_option("--target-years", f.target_years, "Baseline MTTF target");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        const Settings s = build_settings(f);
        if (*run_cmd) return cmd_run(s);
        if (*compare_cmd) return cmd_compare(s);
        if (*sweep_cmd) return cmd_sweep(s);
        if (*gen_cmd) return cmd_gen_trace(s);
        if (*cal_cmd) return cmd_calibrate(s);
    } catch (const ConfigError& e) {
        std::cerr << "nvmsim: " << e.what() << '\n';
        return kUsage;
    } catch (const DomainError& e) {
        std::cerr << "nvmsim: " << e.what() << '\n';
        return kUsage;
    } catch (const TraceError& e) {
        std::cerr << "nvmsim: " << e.what() << '\n';
        return kUsage;
    } catch (const SchedulingError& e) {
        std::cerr << "nvmsim: simulation failed: " << e.what() << '\n';
        return kSimFailure;
    } catch (const Error& e) {
        // I/O problems: missing trace file, unwritable output
        std::cerr << "nvmsim: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "nvmsim: simulation failed: " << e.what() << '\n';
        return kSimFailure;
    }
    return kUsage;
}
