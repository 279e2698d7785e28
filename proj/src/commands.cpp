#include "han/commands.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "han/data_io.hpp"
#include "han/gradcheck.hpp"
#include "han/synthetic.hpp"

namespace han::cli {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string label_map_path(const RunConfig& config, const std::string& manifest) {
  const std::string& explicit_path = config.get("data.label_map");
  if (!explicit_path.empty()) return explicit_path;
  return (std::filesystem::path(manifest).parent_path() / "labels.tsv").string();
}

Dataset load(const RunConfig& config, const std::string& manifest, const ModelConfig& model) {
  LoadOptions opt;
  opt.frames = model.frames;
  opt.streams = parse_stream_selection(config.get("data.streams"));
  const std::string labels = label_map_path(config, manifest);
  if (read_label_map(labels).size() != model.classes) {
    throw ConfigError("label map '" + labels + "' has " +
                      std::to_string(read_label_map(labels).size()) +
                      " classes, model.classes=" + std::to_string(model.classes));
  }
  return load_dataset(manifest, labels, opt);
}

std::string checkpoint_path(const RunConfig& config, const std::string& flag) {
  if (!flag.empty()) return flag;
  return config.require("out.checkpoint");
}

}  // namespace

int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
}

int gen_data(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const SyntheticSpec spec = config.synthetic();
        const std::string& dir = config.require("synth.out_dir");
        const SyntheticDataset data = generate_synthetic(spec);
        write_synthetic(data, dir);
        out << "wrote " << data.samples.size() << " samples (" << spec.classes << " classes, "
            << to_string(spec.policy) << " regions) to " << dir << '\n';
        return kOk;
      },
      err);
}

int train(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const ModelConfig mc = config.model();
        const TrainConfig tc = config.train();
        const std::string& ckpt = config.require("out.checkpoint");
        const Dataset train_set = load(config, config.require("data.manifest"), mc);
        Dataset eval_set;
        if (const auto& m = config.get("data.eval_manifest"); !m.empty()) eval_set = load(config, m, mc);

        HanModel model;
        if (const auto& init = config.get("train.init_checkpoint"); !init.empty()) {
          model = load_checkpoint(init, mc);
        } else {
          Rng init_rng = Rng(tc.seed).fork(0x1D17);
          model = HanModel::initialized(mc, init_rng, tc.uniform_attention);
        }

        std::ofstream metrics_file;
        if (const auto& path = config.get("out.metrics"); !path.empty()) {
          metrics_file.open(path, std::ios::binary | std::ios::trunc);
          if (!metrics_file) throw IoError("cannot open metrics file '" + path + "'");
        }
        auto emit = [&](const std::string& line) {
          out << line << '\n';
          if (metrics_file.is_open()) metrics_file << line << '\n';
        };
        emit("epoch,mean_loss,train_accuracy,eval_accuracy");
        train_epochs(model, train_set, tc, eval_set.empty() ? nullptr : &eval_set,
                     [&](const EpochMetrics& m) {
                       emit(std::to_string(m.epoch) + "," + fmt(m.mean_loss) + "," +
                            fmt(m.train_accuracy) + "," +
                            (m.eval_accuracy ? fmt(*m.eval_accuracy) : std::string{}));
                     });
        save_checkpoint(model, ckpt);
        return kOk;
      },
      err);
}

int eval(const RunConfig& config, const std::string& checkpoint, std::ostream& out,
         std::ostream& err) {
  return guarded(
      [&] {
        const ModelConfig mc = config.model();
        const HanModel model = load_checkpoint(checkpoint_path(config, checkpoint), mc);
        const std::string& manifest = config.require("data.manifest");
        const Dataset data = load(config, manifest, mc);
        const LabelMap labels = read_label_map(label_map_path(config, manifest));
        const EvalResult r = evaluate(model, data);
        out << "class,label,count,correct,accuracy\n";
        for (std::size_t c = 0; c < mc.classes; ++c) {
          const std::size_t n = r.per_class_count[c];
          out << c << ',' << labels.labels[c] << ',' << n << ',' << r.per_class_correct[c] << ','
              << (n == 0 ? std::string{} : fmt(static_cast<double>(r.per_class_correct[c]) /
                                               static_cast<double>(n)))
              << '\n';
        }
        out << "overall,," << data.size() << ",," << fmt(r.accuracy) << '\n';
        out << "mean_per_class,,,," << fmt(r.mean_class_accuracy()) << '\n';
        return kOk;
      },
      err);
}

int attention_dump(const RunConfig& config, const std::string& checkpoint,
                   const std::string& sample, std::ostream& out, std::ostream& err) {
  return guarded(
      [&] {
        const ModelConfig mc = config.model();
        const HanModel model = load_checkpoint(checkpoint_path(config, checkpoint), mc);
        const Dataset data = load(config, config.require("data.manifest"), mc);
        out << "sample_id,t,region_index,weight\n";
        bool found = false;
        for (const Sample& s : data) {
          if (!sample.empty() && s.id != sample) continue;
          found = true;
          const ForwardResult fr = forward(model, s.cubes_p, s.cubes_q);
          for (std::size_t t = 0; t < fr.trace.frames.size(); ++t) {
            const Vector& l = fr.trace.frames[t].attention.l;
            for (std::size_t i = 0; i < l.size(); ++i) {
              out << s.id << ',' << (t + 1) << ',' << i << ',' << fmt(l[i]) << '\n';
            }
          }
        }
        if (!found) throw ConfigError("sample '" + sample + "' not found in manifest");
        return kOk;
      },
      err);
}

int gradcheck(const RunConfig& config, const std::string& corrupt_block, std::ostream& out,
              std::ostream& err) {
  return guarded(
      [&] {
        const ModelConfig mc = config.model();
        const double step = config.get_double("gradcheck.step");
        const double tol = config.get_double("gradcheck.tolerance");
        Rng rng(config.get_u64("gradcheck.seed"));
        const HanModel model = HanModel::initialized(mc, rng);
        const Sample sample = random_sample(mc, rng);

        const auto start = std::chrono::steady_clock::now();
        const GradCheckReport report = check_gradients(model, sample, step, tol, corrupt_block);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        out << "block,size,max_rel_error,max_abs_error,status\n";
        for (const auto& b : report.blocks) {
          out << b.name << ',' << b.size << ',' << fmt(b.max_rel_error) << ','
              << fmt(b.max_abs_error) << ',' << (b.pass ? "pass" : "FAIL") << '\n';
        }
        err << "gradcheck " << mc.describe() << ": " << report.blocks.size() << " blocks, "
            << (report.all_pass ? "all pass" : "FAILED") << " (" << fmt(secs) << " s)\n";
        for (const auto& b : report.blocks) {
          if (!b.pass) err << "failing block: " << b.name << '\n';
        }
        return report.all_pass ? kOk : kCheckFailed;
      },
      err);
}

}  // namespace han::cli
