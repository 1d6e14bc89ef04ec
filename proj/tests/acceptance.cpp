// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
//
//   acceptance [--artifacts DIR] [--only 1,4,9]

#include "CLI11.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stego/error.hpp"
#include "stego/pipeline.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace stego;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::string checkpoint_bytes(const StegoModel& model) {
  std::ostringstream out;
  write_checkpoint(out, to_checkpoint(model));
  return out.str();
}

ImageBuffer random_image(std::size_t h, std::size_t w, std::size_t c, SplitMix64& rng) {
  ImageBuffer img(h, w, c);
  for (auto& p : img.pixels()) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

// Toy configuration shared by the convergence, attack and determinism checks:
// 64 training pairs plus 16 held out.
TrainConfig toy_config() {
  TrainConfig c;
  c.beta = 1.0;
  c.epochs = 300;
  c.batch_size = 8;
  c.image_size = 32;
  c.grid_side = 4;
  c.dataset_pairs = 80;
  c.dataset_seed = 1;
  c.rng_seed = 7;
  return c;
}

// Smaller runs for the nine-run beta sweep.
TrainConfig sweep_config() {
  TrainConfig c;
  c.epochs = 100;
  c.batch_size = 8;
  c.image_size = 16;
  c.grid_side = 4;
  c.dataset_pairs = 40;
  c.dataset_seed = 1;
  return c;
}

TrainReport train_verbose(const TrainConfig& config, const char* tag) {
  TrainOptions opts;
  opts.on_epoch = [&](const MetricsRecord& r) {
    if (r.epoch == 1 || r.epoch % 25 == 0 || r.epoch == config.epochs) {
      std::fprintf(stderr, "  [%s] epoch %zu/%zu encode_loss %.6f cover_mse %.2f secret_mse %.2f\n", tag, r.epoch,
                   config.epochs, r.encode_loss, r.cover_mse, r.secret_mse);
    }
  };
  return train(config, opts);
}

class Suite {
 public:
  explicit Suite(fs::path artifacts) : dir_(std::move(artifacts)) { fs::create_directories(dir_); }

  Outcome parameter_counts() {
    const StegoModel m = make_zero_model(3);
    const std::size_t enc = m.encoder_parameter_count(), dec = m.decoder_parameter_count();
    return {enc == 293'273 && dec == 195'388 && enc + dec == 488'661,
            fmt("encoder %zu, decoder %zu, total %zu", enc, dec, enc + dec)};
  }

  Outcome cipher_invariants() {
    SplitMix64 rng(2024);
    const std::size_t sizes[] = {28, 56}, grids[] = {2, 7, 14};
    std::size_t failures = 0;
    for (int i = 0; i < 200; ++i) {
      const std::size_t size = sizes[i % 2], grid = grids[(i / 2) % 3];
      const ImageBuffer img = random_image(size, size, 3, rng);
      const PermutationKey key = derive_key(rng.next(), grid);
      const ImageBuffer enc = encrypt(img, key);
      if (decrypt(enc, key) != img || histogram(enc) != histogram(img)) ++failures;
    }
    return {failures == 0, fmt("200 pairs, %zu failures", failures)};
  }

  Outcome keyspace_arithmetic() {
    const double l10 = keyspace(196).log10_permutations;
    const double mantissa = std::pow(10.0, l10 - std::floor(l10));
    const double years = brute_force_years(196, 1e16);
    const bool ok = l10 >= 365.5 && l10 <= 366.0 && std::abs(mantissa - 5.08) < 0.01 && years >= 341.5 && years <= 342.5;
    return {ok, fmt("log10(196!) = %.4f (%.3fe%d), log10 years at 1e16/s = %.3f", l10, mantissa, int(std::floor(l10)),
                    years)};
  }

  Outcome gradient_check() {
    const auto stages = oracle::network_gradient_check(8, 20, 5, 1e-3);
    bool ok = stages.size() == 14;
    double worst = 0.0;
    std::size_t checked = 0;
    std::ostringstream csv;
    csv << "stage,checked,failed,worst_relative_error\n";
    for (const auto& s : stages) {
      ok = ok && s.checked >= 20 && s.failed == 0;
      worst = std::max(worst, s.worst);
      checked += s.checked;
      csv << s.stage << ',' << s.checked << ',' << s.failed << ',' << s.worst << '\n';
    }
    write_file(dir_ / "gradient_check.csv", csv.str());
    return {ok, fmt("%zu stages, %zu entries, worst relative error %.2e", stages.size(), checked, worst)};
  }

  Outcome adam_reference() {
    const std::vector<double> start{-4.0, 7.5, 0.25}, target{3.0, -2.0, 0.0};
    BasicParameterSet<double> params;
    params.add("theta", BasicTensor<double>({3}, std::vector<double>(start)));
    BasicAdamState<double> state;
    AdamConfig cfg;
    cfg.learning_rate = 0.01;
    oracle::ReferenceAdam ref(3, cfg.learning_rate);
    std::vector<double> theta = start;
    double worst = 0.0;
    for (int s = 0; s < 100; ++s) {
      BasicParameterSet<double> grads;
      std::vector<double> g(3);
      BasicTensor<double> gt({3});
      for (std::size_t i = 0; i < 3; ++i) {
        gt[i] = 2.0 * (params.at("theta")[i] - target[i]);
        g[i] = 2.0 * (theta[i] - target[i]);
      }
      grads.add("theta", gt);
      adam_step(params, grads, state, cfg);
      ref.step(theta, g);
      for (std::size_t i = 0; i < 3; ++i) worst = std::max(worst, std::abs(params.at("theta")[i] - theta[i]));
    }
    return {worst <= 1e-6, fmt("100 steps, largest deviation %.3e", worst)};
  }

  Outcome toy_convergence() {
    const TrainReport& r = toy();
    const auto& s = r.series;
    const double first = s.front().encode_loss, last = s.back().encode_loss;
    std::vector<double> ma;
    for (std::size_t i = 9; i < s.size(); ++i) {
      double sum = 0.0;
      for (std::size_t k = i - 9; k <= i; ++k) sum += s[k].encode_loss;
      ma.push_back(sum / 10.0);
    }
    // ma[i] ends at epoch i + 10; compare neighbours that both end in the
    // final 80% of epochs.
    const std::size_t first_epoch = s.size() - (s.size() * 8) / 10 + 1;
    std::size_t rises = 0;
    double worst_rise = 0.0;
    for (std::size_t i = 1; i < ma.size(); ++i) {
      if (i - 1 + 10 < first_epoch) continue;
      const double d = ma[i] - ma[i - 1];
      if (d > 0.0) {
        ++rises;
        worst_rise = std::max(worst_rise, d);
      }
    }
    const bool ok = last < 0.2 * first && rises == 0;
    return {ok, fmt("encode_loss %.5f -> %.5f (ratio %.4f); moving average rises %zu times, largest %.2e; %.0f s",
                    first, last, last / first, rises, worst_rise, r.seconds)};
  }

  Outcome beta_ordering() {
    const std::vector<double> betas{0.25, 0.75, 1.0};
    const std::vector<std::uint64_t> seeds{1, 2, 3};
    const auto start = std::chrono::steady_clock::now();
    std::vector<SweepRow> rows;
    for (double beta : betas) {
      SweepRow row{beta, 0.0, 0.0};
      for (std::uint64_t seed : seeds) {
        TrainConfig c = sweep_config();
        c.beta = beta;
        c.rng_seed = seed;
        const TrainReport r = train(c);
        std::fprintf(stderr, "  [sweep] beta %.2f seed %llu cover_mse %.2f secret_mse %.2f (%.0f s)\n", beta,
                     static_cast<unsigned long long>(seed), r.series.back().cover_mse, r.series.back().secret_mse,
                     r.seconds);
        row.cover_mse += r.series.back().cover_mse / double(seeds.size());
        row.secret_mse += r.series.back().secret_mse / double(seeds.size());
      }
      rows.push_back(row);
    }
    write_file(dir_ / "beta_sweep.csv", sweep_csv(rows));
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    bool ok = true;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      ok = ok && rows[i].secret_mse < rows[i - 1].secret_mse && rows[i].cover_mse > rows[i - 1].cover_mse;
    }
    std::string detail;
    for (const auto& r : rows) detail += fmt("beta %.2f: cover %.2f secret %.2f; ", r.beta, r.cover_mse, r.secret_mse);
    return {ok, detail + fmt("%.0f s", seconds)};
  }

  Outcome residual_attack_defense() {
    const TrainReport& r = toy();
    const auto& pairs = r.dataset.heldout;
    double plain = 0.0, ciphered = 0.0;
    std::ostringstream csv;
    csv << "pair,similarity_plain,similarity_encrypted\n";
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const double a = residual_attack(pairs[i].secret, pairs[i].cover, nullptr, r.model).similarity;
      const double b = residual_attack(pairs[i].secret, pairs[i].cover, &pairs[i].key, r.model).similarity;
      plain += a;
      ciphered += b;
      csv << i << ',' << a << ',' << b << '\n';
    }
    write_file(dir_ / "residual_attack.csv", csv.str());
    plain /= double(pairs.size());
    ciphered /= double(pairs.size());
    const double gap = plain - ciphered;
    return {pairs.size() == 16 && plain > ciphered,
            fmt("%zu pairs, mean similarity plain %.4f vs encrypted %.4f, gap %.4f (reporting target 0.15 %s)",
                pairs.size(), plain, ciphered, gap, gap >= 0.15 ? "met" : "not met")};
  }

  Outcome correlation_trend() {
    const auto images = synth_dataset(1, 20, 112, SynthKind::gradients);
    std::ostringstream csv;
    csv << "grid_side,blocks,mean_abs_correlation\n";
    double prev = 2.0;
    bool ok = true;
    std::string detail;
    for (std::size_t g : {2, 4, 8, 14}) {
      double sum = 0.0;
      for (std::size_t i = 0; i < images.size(); ++i) {
        sum += mean_abs_adjacent_correlation(encrypt(images[i], derive_key(100 + i, g)));
      }
      const double mean = sum / double(images.size());
      ok = ok && mean <= prev;
      prev = mean;
      csv << g << ',' << g * g << ',' << mean << '\n';
      detail += fmt("%zu blocks %.4f; ", g * g, mean);
    }
    write_file(dir_ / "correlation.csv", csv.str());
    return {ok, detail.substr(0, detail.size() - 2)};
  }

  Outcome determinism_and_formats() {
    std::vector<std::string> problems;
    SplitMix64 rng(10);
    for (int i = 0; i < 10; ++i) {
      const ImageBuffer img = random_image(1 + rng.below(40), 1 + rng.below(40), 3, rng);
      const auto bytes = write_ppm(img);
      if (write_ppm(read_ppm(bytes)) != bytes || read_ppm(bytes) != img) problems.push_back("PPM round trip");
    }
    const PermutationKey key = derive_key(42, 14);
    if (key.perm != oracle::kPerm42Grid14) problems.push_back("golden permutation");
    const std::string key_text = format_key_file(key);
    if (format_key_file(parse_key_file(key_text)) != key_text || parse_key_file(key_text) != key) {
      problems.push_back("SGKEY1 round trip");
    }
    const fs::path key_path = dir_ / "golden.sgkey";
    save_key(key_path.string(), key);
    if (load_key(key_path.string()) != key) problems.push_back("SGKEY1 file");

    const TrainReport& first = toy();
    const std::string first_bytes = checkpoint_bytes(first.model);
    Checkpoint back = load_checkpoint((dir_ / "toy.sgn").string());
    if (checkpoint_bytes(from_checkpoint(back)) != first_bytes) problems.push_back("SGN1 file round trip");

    const TrainReport rerun = train_verbose(toy_config(), "rerun");
    const bool same = checkpoint_bytes(rerun.model) == first_bytes && metrics_csv(rerun.series) == metrics_csv(first.series);
    if (!same) problems.push_back("toy rerun checkpoint differs");

    std::string detail = problems.empty() ? "PPM, SGKEY1 and SGN1 round trips exact; golden permutation matches; "
                                            "toy rerun checkpoint identical"
                                          : "failed:";
    for (const auto& p : problems) detail += " " + p + ";";
    return {problems.empty(), detail + fmt(" (%zu checkpoint bytes)", first_bytes.size())};
  }

 private:
  const TrainReport& toy() {
    if (!toy_) {
      toy_ = train_verbose(toy_config(), "toy");
      save_checkpoint((dir_ / "toy.sgn").string(), to_checkpoint(toy_->model));
      write_file(dir_ / "toy_metrics.csv", metrics_csv(toy_->series));
      write_file(dir_ / "toy.cfg", format_train_config(toy_config()));
    }
    return *toy_;
  }

  fs::path dir_;
  std::optional<TrainReport> toy_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string artifacts = "acceptance_artifacts";
  std::vector<int> only;
  app.add_option("--artifacts", artifacts, "Directory for CSVs and checkpoints");
  app.add_option("--only", only, "Run just these criteria")->delimiter(',')->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);

  Suite suite{fs::path(artifacts)};
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"parameter counts", [&] { return suite.parameter_counts(); }},
      {"cipher invariants", [&] { return suite.cipher_invariants(); }},
      {"keyspace arithmetic", [&] { return suite.keyspace_arithmetic(); }},
      {"gradient correctness", [&] { return suite.gradient_check(); }},
      {"Adam reference equivalence", [&] { return suite.adam_reference(); }},
      {"toy convergence", [&] { return suite.toy_convergence(); }},
      {"beta tradeoff ordering", [&] { return suite.beta_ordering(); }},
      {"residual-attack defense", [&] { return suite.residual_attack_defense(); }},
      {"correlation vs order", [&] { return suite.correlation_trend(); }},
      {"determinism and formats", [&] { return suite.determinism_and_formats(); }},
  };

  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.contains(n)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", n, criteria[i].first, o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
