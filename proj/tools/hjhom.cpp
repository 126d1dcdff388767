// Command line front end:
//   hjhom effective  --config c.cfg --out dir
//   hjhom rate       --config c.cfg --out dir
//   hjhom properties --config c.cfg --out dir
//   hjhom metric     --config c.cfg --out dir
// Exit codes: 0 ok, 2 configuration error, 3 resolution error, 4 property failure.

#include <iostream>

#include "CLI11.hpp"
#include "hjhom/harness.hpp"

namespace {

struct Options {
  std::string config;
  std::string out = "out";
  int threads = 1;
  bool verbose = false;
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "configuration file (key = value)")->required()->check(CLI::ExistingFile);
  sub->add_option("--out", o.out, "output directory")->capture_default_str();
  sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_flag("--verbose", o.verbose, "progress on stderr");
}

int run(const std::string& command, const Options& o) {
  const hjhom::Config cfg = hjhom::Config::load(o.config);
  hjhom::RunContext ctx;
  ctx.out_dir = o.out;
  ctx.threads = o.threads;
  ctx.verbose = o.verbose;
  ctx.log = &std::cerr;

  if (command == "effective") {
    auto r = hjhom::run_effective(cfg, ctx);
    std::cout << "effective model n_max=" << r.model.n_max << (r.model.partial ? " (partial)" : "") << " written to "
              << o.out << "\n";
  } else if (command == "rate") {
    auto r = hjhom::run_rate_sweep(cfg, ctx);
    std::cout << "beta=" << hjhom::fmt(r.fit.beta) << " prefactor=" << hjhom::fmt(r.fit.prefactor)
              << " log_constant=" << hjhom::fmt(r.log_fit.constant) << " probe=" << hjhom::fmt(r.probe) << "\n";
  } else if (command == "properties") {
    auto r = hjhom::run_property_suite(cfg, ctx);
    for (const auto& c : r.checks)
      std::cout << (c.passed ? "pass " : "FAIL ") << c.name << " value=" << hjhom::fmt(c.value)
                << " threshold=" << hjhom::fmt(c.threshold) << "\n";
    if (!r.all_passed()) throw hjhom::PropertyFailure("property suite: at least one check failed");
  } else if (command == "metric") {
    auto tab = hjhom::run_metric(cfg, ctx);
    std::cout << "metric table horizon=" << tab.horizon() << " layers=" << tab.layers.size() << "\n";
  }
  return hjhom::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Periodic homogenization of u_t + |Du|^2 - V(x/eps) = 0 via the metric problem"};
  app.require_subcommand(1);
  Options o;
  for (const char* name : {"effective", "rate", "properties", "metric"}) add_common(app.add_subcommand(name), o);
  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return run(command, o);
  } catch (const hjhom::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return hjhom::kExitConfig;
  } catch (const hjhom::ResolutionError& e) {
    std::cerr << "resolution error: " << e.what() << "\n";
    return hjhom::kExitResolution;
  } catch (const hjhom::PropertyFailure& e) {
    std::cerr << e.what() << "\n";
    return hjhom::kExitProperty;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
