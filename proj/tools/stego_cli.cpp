#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stego/stego.h"

namespace {

struct ImageDeleter {
  void operator()(stego_image* p) const { stego_image_free(p); }
};
struct KeyDeleter {
  void operator()(stego_key* p) const { stego_key_free(p); }
};
struct ModelDeleter {
  void operator()(stego_model* p) const { stego_model_free(p); }
};
using Image = std::unique_ptr<stego_image, ImageDeleter>;
using Key = std::unique_ptr<stego_key, KeyDeleter>;
using Model = std::unique_ptr<stego_model, ModelDeleter>;

// Carries a library status out to main().
struct Failure {
  stego_status status;
  std::string message;
};

void check(stego_status s) {
  if (s != STEGO_OK) throw Failure{s, stego_last_error()};
}

[[noreturn]] void usage_error(const std::string& message) { throw Failure{STEGO_USAGE, message}; }

Image read_image(const std::string& path) {
  stego_image* p = nullptr;
  check(stego_image_read_ppm(path.c_str(), &p));
  return Image(p);
}

void write_image(const stego_image* image, const std::string& path) { check(stego_image_write_ppm(image, path.c_str())); }

Key read_key(const std::string& path) {
  if (path.empty()) return nullptr;
  stego_key* p = nullptr;
  check(stego_key_read(path.c_str(), &p));
  return Key(p);
}

Model read_model(const std::string& path) {
  stego_model* p = nullptr;
  check(stego_model_load(path.c_str(), &p));
  return Model(p);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::fputs(text.c_str(), stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) usage_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out.flush()) usage_error("failed writing '" + path + "'");
}

struct Dims {
  std::size_t height = 0, width = 0, channels = 0;
};

Dims dims(const stego_image* image) {
  Dims d;
  stego_image_dims(image, &d.height, &d.width, &d.channels);
  return d;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Per-channel bar charts stacked vertically, 256 columns, 100 rows each.
void write_histogram_chart(const std::vector<uint64_t>& counts, std::size_t channels, const std::string& path) {
  constexpr std::size_t kRows = 100;
  std::vector<uint8_t> pixels(channels * kRows * 256 * 3, 255);
  for (std::size_t c = 0; c < channels; ++c) {
    uint64_t peak = 1;
    for (std::size_t b = 0; b < 256; ++b) peak = std::max(peak, counts[c * 256 + b]);
    for (std::size_t b = 0; b < 256; ++b) {
      const auto bar = static_cast<std::size_t>((counts[c * 256 + b] * kRows + peak - 1) / peak);
      for (std::size_t r = 0; r < bar; ++r) {
        const std::size_t y = c * kRows + (kRows - 1 - r);
        uint8_t* px = &pixels[(y * 256 + b) * 3];
        px[0] = px[1] = px[2] = 0;
        if (channels == 3) px[c] = 200;
      }
    }
  }
  stego_image* p = nullptr;
  check(stego_image_create(channels * kRows, 256, 3, pixels.data(), &p));
  Image chart(p);
  write_image(chart.get(), path);
}

struct ReportArgs {
  std::string what;
  std::vector<std::string> inputs;
  std::string out_csv;
  std::string out_ppm;
  std::vector<uint64_t> blocks{196};
  double ops = 1e16;
  std::vector<std::size_t> grids{1, 2, 4, 8, 14};
  std::size_t count = 20;
  std::size_t size = 112;
  uint64_t seed = 1;
  std::string config;
  std::vector<double> betas{0.25, 0.75, 1.0};
  std::vector<uint64_t> seeds;
};

void report_histogram(const ReportArgs& a) {
  if (a.inputs.empty()) usage_error("--what histogram needs at least one --in image");
  std::string csv = "image,channel,bin,count\n";
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    Image img = read_image(a.inputs[i]);
    const std::size_t channels = dims(img.get()).channels;
    std::vector<uint64_t> counts(channels * 256);
    check(stego_image_histogram(img.get(), counts.data(), counts.size()));
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t b = 0; b < 256; ++b) {
        csv += a.inputs[i] + ',' + std::to_string(c) + ',' + std::to_string(b) + ',' +
               std::to_string(counts[c * 256 + b]) + '\n';
      }
    }
    if (!a.out_ppm.empty()) {
      std::string path = a.out_ppm;
      if (a.inputs.size() > 1) {
        const auto dot = path.rfind('.');
        path = (dot == std::string::npos ? path : path.substr(0, dot)) + "_" + std::to_string(i) + ".ppm";
      }
      write_histogram_chart(counts, channels, path);
    }
  }
  write_text(a.out_csv, csv);
}

void report_errors(const ReportArgs& a) {
  if (a.inputs.size() != 2) usage_error("--what errors needs exactly two --in images");
  Image x = read_image(a.inputs[0]);
  Image y = read_image(a.inputs[1]);
  uint64_t counts[256];
  check(stego_image_error_histogram(x.get(), y.get(), counts));
  std::string csv = "abs_error,count\n";
  for (std::size_t b = 0; b < 256; ++b) csv += std::to_string(b) + ',' + std::to_string(counts[b]) + '\n';
  write_text(a.out_csv, csv);
}

void report_correlation(const ReportArgs& a) {
  std::vector<Image> images;
  if (a.inputs.empty()) {
    for (std::size_t i = 0; i < a.count; ++i) {
      stego_image* p = nullptr;
      check(stego_image_synthesize(a.seed, i, a.size, "gradients", 3, &p));
      images.emplace_back(p);
    }
  } else {
    for (const auto& path : a.inputs) images.push_back(read_image(path));
  }
  if (images.empty()) usage_error("--count must be at least 1");
  std::string csv = "grid_side,blocks,images,mean_abs_correlation\n";
  for (std::size_t g : a.grids) {
    if (g == 0) usage_error("--grids entries must be >= 1");
    double total = 0.0;
    for (std::size_t i = 0; i < images.size(); ++i) {
      stego_key* kp = nullptr;
      check(stego_key_derive(a.seed + i, g, &kp));
      Key key(kp);
      stego_image* ep = nullptr;
      check(stego_encrypt(images[i].get(), key.get(), &ep));
      Image enc(ep);
      double m = 0.0;
      check(stego_image_adjacent_correlation(enc.get(), nullptr, 0, &m));
      total += m;
    }
    csv += std::to_string(g) + ',' + std::to_string(g * g) + ',' + std::to_string(images.size()) + ',' +
           fmt(total / static_cast<double>(images.size())) + '\n';
  }
  write_text(a.out_csv, csv);
}

void report_keyspace(const ReportArgs& a) {
  std::string csv = "blocks,log10_permutations,log2_permutations,ops_per_second,log10_years\n";
  for (uint64_t n : a.blocks) {
    double l10 = 0, l2 = 0, years = 0;
    check(stego_keyspace(n, &l10, &l2));
    check(stego_brute_force_years(n, a.ops, &years));
    csv += std::to_string(n) + ',' + fmt(l10) + ',' + fmt(l2) + ',' + fmt(a.ops) + ',' + fmt(years) + '\n';
  }
  write_text(a.out_csv, csv);
}

void report_sweep(const ReportArgs& a) {
  if (a.config.empty()) usage_error("--what sweep needs --config");
  if (a.out_csv.empty()) usage_error("--what sweep needs --out-csv");
  check(stego_beta_sweep(a.config.c_str(), a.betas.data(), a.betas.size(), a.seeds.empty() ? nullptr : a.seeds.data(),
                         a.seeds.size(), a.out_csv.c_str()));
}

void print_epoch(const stego_epoch_metrics* m, void*) {
  std::fprintf(stderr, "epoch %zu  encode_loss %.6f  reveal_loss %.6f  cover_mse %.3f  secret_mse %.3f\n", m->epoch,
               m->encode_loss, m->reveal_loss, m->cover_mse, m->secret_mse);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Image-in-image steganography with a block-permutation cipher"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(stego_version()));

  // keygen
  uint64_t kg_seed = 0;
  std::size_t kg_grid = 0;
  std::string kg_out;
  auto* keygen = app.add_subcommand("keygen", "Derive a block-permutation key and write it as SGKEY1");
  keygen->add_option("--seed", kg_seed, "Key seed")->required();
  keygen->add_option("--grid", kg_grid, "Blocks per side")->required()->check(CLI::PositiveNumber);
  keygen->add_option("--out", kg_out, "Key file")->required();

  // encrypt / decrypt
  std::string cx_in, cx_key, cx_out;
  auto* enc = app.add_subcommand("encrypt", "Scramble the blocks of a PPM image");
  auto* dec = app.add_subcommand("decrypt", "Undo encrypt");
  for (auto* sub : {enc, dec}) {
    sub->add_option("--in", cx_in, "Input PPM")->required();
    sub->add_option("--key", cx_key, "SGKEY1 file")->required();
    sub->add_option("--out", cx_out, "Output PPM")->required();
  }

  // train
  std::string tr_config, tr_ckpt, tr_csv;
  bool tr_quiet = false;
  auto* trn = app.add_subcommand("train", "Train encoder and decoder from a config file");
  trn->add_option("--config", tr_config, "key = value config file")->required();
  trn->add_option("--out-checkpoint", tr_ckpt, "SGN1 checkpoint to write")->required();
  trn->add_option("--metrics-csv", tr_csv, "Per-epoch metrics CSV");
  trn->add_flag("--quiet", tr_quiet, "No per-epoch progress");

  // hide
  std::string hd_ckpt, hd_key, hd_cover, hd_secret, hd_out;
  auto* hide = app.add_subcommand("hide", "Embed a secret image in a cover image");
  hide->add_option("--checkpoint", hd_ckpt, "SGN1 checkpoint")->required();
  hide->add_option("--key", hd_key, "SGKEY1 file; omit to skip the cipher");
  hide->add_option("--cover", hd_cover, "Cover PPM")->required();
  hide->add_option("--secret", hd_secret, "Secret PPM")->required();
  hide->add_option("--out", hd_out, "Container PPM")->required();

  // reveal
  std::string rv_ckpt, rv_key, rv_container, rv_out, rv_out_revealed;
  auto* reveal = app.add_subcommand("reveal", "Recover the secret image from a container");
  reveal->add_option("--checkpoint", rv_ckpt, "SGN1 checkpoint")->required();
  reveal->add_option("--key", rv_key, "SGKEY1 file; omit if hide ran without one");
  reveal->add_option("--container", rv_container, "Container PPM")->required();
  reveal->add_option("--out", rv_out, "Decrypted secret PPM")->required();
  reveal->add_option("--out-revealed", rv_out_revealed, "Decoder output before decryption");

  // attack
  std::string at_ckpt, at_key, at_cover, at_secret, at_residual, at_csv;
  auto* attack = app.add_subcommand("attack", "Residual attack with the original cover");
  attack->add_option("--checkpoint", at_ckpt, "SGN1 checkpoint")->required();
  attack->add_option("--key", at_key, "SGKEY1 file; omit to attack an unencrypted embedding");
  attack->add_option("--cover", at_cover, "Cover PPM")->required();
  attack->add_option("--secret", at_secret, "Secret PPM")->required();
  attack->add_option("--out-residual", at_residual, "Enhanced residual PPM");
  attack->add_option("--out-csv", at_csv, "One-row CSV with the similarity");

  // report
  ReportArgs ra;
  auto* report = app.add_subcommand("report", "CSV series for histograms, correlation, keyspace and beta sweeps");
  report->add_option("--what", ra.what, "histogram | errors | correlation | keyspace | sweep")->required();
  report->add_option("--in", ra.inputs, "Input PPM (repeatable)");
  report->add_option("--out-csv", ra.out_csv, "CSV output (stdout when omitted)");
  report->add_option("--out-ppm", ra.out_ppm, "histogram: bar-chart PPM");
  report->add_option("--blocks", ra.blocks, "keyspace: block counts")->delimiter(',');
  report->add_option("--ops", ra.ops, "keyspace: guesses per second")->check(CLI::PositiveNumber);
  report->add_option("--grids", ra.grids, "correlation: grid sides")->delimiter(',');
  report->add_option("--count", ra.count, "correlation: synthetic images");
  report->add_option("--size", ra.size, "correlation: synthetic image side")->check(CLI::PositiveNumber);
  report->add_option("--seed", ra.seed, "correlation: image and key seed");
  report->add_option("--config", ra.config, "sweep: base training config");
  report->add_option("--betas", ra.betas, "sweep: beta values")->delimiter(',');
  report->add_option("--seeds", ra.seeds, "sweep: rng seeds averaged per beta")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return STEGO_USAGE;
  }

  try {
    if (*keygen) {
      stego_key* p = nullptr;
      check(stego_key_derive(kg_seed, kg_grid, &p));
      Key key(p);
      check(stego_key_write(key.get(), kg_out.c_str()));
    } else if (*enc || *dec) {
      Image in = read_image(cx_in);
      Key key = read_key(cx_key);
      stego_image* p = nullptr;
      check(*enc ? stego_encrypt(in.get(), key.get(), &p) : stego_decrypt(in.get(), key.get(), &p));
      Image out(p);
      write_image(out.get(), cx_out);
    } else if (*trn) {
      stego_epoch_metrics first{}, last{};
      check(stego_train(tr_config.c_str(), tr_ckpt.c_str(), tr_csv.empty() ? nullptr : tr_csv.c_str(),
                        tr_quiet ? nullptr : print_epoch, nullptr, &first, &last));
      std::printf("epochs %zu  encode_loss %.6f -> %.6f  cover_mse %.3f  secret_mse %.3f\n", last.epoch,
                  first.encode_loss, last.encode_loss, last.cover_mse, last.secret_mse);
    } else if (*hide) {
      Model model = read_model(hd_ckpt);
      Key key = read_key(hd_key);
      Image cover = read_image(hd_cover);
      Image secret = read_image(hd_secret);
      stego_image* p = nullptr;
      check(stego_hide(model.get(), secret.get(), cover.get(), key.get(), &p));
      Image container(p);
      write_image(container.get(), hd_out);
    } else if (*reveal) {
      Model model = read_model(rv_ckpt);
      Key key = read_key(rv_key);
      Image container = read_image(rv_container);
      stego_image *rp = nullptr, *sp = nullptr;
      check(stego_reveal(model.get(), container.get(), key.get(), &rp, &sp));
      Image revealed(rp), secret(sp);
      write_image(secret.get(), rv_out);
      if (!rv_out_revealed.empty()) write_image(revealed.get(), rv_out_revealed);
    } else if (*attack) {
      Model model = read_model(at_ckpt);
      Key key = read_key(at_key);
      Image cover = read_image(at_cover);
      Image secret = read_image(at_secret);
      stego_image* p = nullptr;
      double similarity = 0.0;
      check(stego_attack(model.get(), secret.get(), cover.get(), key.get(), &p, &similarity));
      Image residual(p);
      if (!at_residual.empty()) write_image(residual.get(), at_residual);
      write_text(at_csv, std::string("encrypted,similarity\n") + (key ? "1," : "0,") + fmt(similarity) + '\n');
    } else if (*report) {
      if (ra.what == "histogram") {
        report_histogram(ra);
      } else if (ra.what == "errors") {
        report_errors(ra);
      } else if (ra.what == "correlation") {
        report_correlation(ra);
      } else if (ra.what == "keyspace") {
        report_keyspace(ra);
      } else if (ra.what == "sweep") {
        report_sweep(ra);
      } else {
        usage_error("unknown --what '" + ra.what + "' (expected histogram, errors, correlation, keyspace or sweep)");
      }
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return f.status;
  }
  return 0;
}
