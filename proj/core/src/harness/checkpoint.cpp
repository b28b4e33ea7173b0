#include "flowgrpo/harness/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include "flowgrpo/diffcore/errors.hpp"
#include "flowgrpo/harness/io.hpp"

namespace flowgrpo {

using nlohmann::json;

std::string_view to_string(Phase phase) noexcept {
  return phase == Phase::Grpo ? "grpo" : "pretrained";
}

namespace {

constexpr const char* kCheckpointFormat = "flowgrpo-checkpoint";
constexpr const char* kDatasetFormat = "flowgrpo-dataset";

Phase phase_from_string(const std::string& s) {
  if (s == "pretrained") return Phase::Pretrained;
  if (s == "grpo") return Phase::Grpo;
  throw ParseError("checkpoint: unknown phase tag '" + s + "'", 0);
}

json array_to_json(const DenseArray& a) {
  return json{{"shape", a.shape()}, {"values", a.values()}};
}

DenseArray array_from_json(const json& j) {
  auto shape = j.at("shape").get<std::vector<std::size_t>>();
  auto values = j.at("values").get<std::vector<double>>();
  return DenseArray(std::move(shape), std::move(values));
}

json parse_document(std::string_view bytes, const char* format) {
  json doc;
  try {
    doc = json::parse(bytes);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(format) + ": malformed JSON: " + e.what(), e.byte);
  }
  if (!doc.is_object() || !doc.contains("format") || doc["format"] != format) {
    throw ParseError(std::string("not a ") + format + " document", 0);
  }
  return doc;
}

// Runs fn, turning schema errors (missing keys, wrong types, bad shapes) into ParseError.
template <typename Fn>
auto with_schema_errors(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw ParseError(std::string(what) + ": schema error: " + e.what(), 0);
  } catch (const DimensionError& e) {
    throw ParseError(std::string(what) + ": schema error: " + e.what(), 0);
  } catch (const ConfigError& e) {
    throw ParseError(std::string(what) + ": embedded config invalid: " + e.what(), 0);
  }
}

json prototypes_to_json(const Prototypes& p) {
  return json{{"speaker_offsets", array_to_json(p.speaker_offsets)},
              {"token_patterns", array_to_json(p.token_patterns)}};
}

json utterances_to_json(const std::vector<Utterance>& utts) {
  json out = json::array();
  for (const Utterance& u : utts) {
    out.push_back(json{{"speaker", u.speaker},
                       {"tokens", u.tokens.ids},
                       {"vocab", u.tokens.vocab},
                       {"frames", array_to_json(u.frames)}});
  }
  return out;
}

std::vector<Utterance> utterances_from_json(const json& j) {
  std::vector<Utterance> out;
  for (const json& u : j) {
    Utterance utt;
    utt.speaker = u.at("speaker").get<int>();
    utt.tokens.ids = u.at("tokens").get<std::vector<int>>();
    utt.tokens.vocab = u.at("vocab").get<std::size_t>();
    utt.frames = array_from_json(u.at("frames"));
    out.push_back(std::move(utt));
  }
  return out;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  json params = json::array();
  for (const Param& p : ckpt.params.entries()) {
    params.push_back(json{{"name", p.name}, {"shape", p.value.shape()}, {"values", p.value.values()}});
  }
  json first = json::array(), second = json::array();
  for (const DenseArray& m : ckpt.optimizer.first_moment) first.push_back(m.values());
  for (const DenseArray& v : ckpt.optimizer.second_moment) second.push_back(v.values());
  const AdamConfig& oc = ckpt.optimizer.config;
  json doc = {
      {"format", kCheckpointFormat},
      {"version", ckpt.version},
      {"phase", std::string(to_string(ckpt.phase))},
      {"step", ckpt.step},
      {"config", json::parse(config_to_json(ckpt.config))},
      {"params", std::move(params)},
      {"optimizer",
       {{"lr", oc.lr},
        {"beta1", oc.beta1},
        {"beta2", oc.beta2},
        {"epsilon", oc.epsilon},
        {"step", ckpt.optimizer.step},
        {"first_moment", std::move(first)},
        {"second_moment", std::move(second)}}},
  };
  return doc.dump() + "\n";
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  const json doc = parse_document(bytes, kCheckpointFormat);
  const int version = with_schema_errors("checkpoint", [&] { return doc.at("version").get<int>(); });
  if (version != kCheckpointVersion) {
    throw ContractError("checkpoint: format version " + std::to_string(version) +
                        " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  return with_schema_errors("checkpoint", [&] {
    Checkpoint ckpt;
    ckpt.version = version;
    ckpt.phase = phase_from_string(doc.at("phase").get<std::string>());
    ckpt.step = doc.at("step").get<std::uint64_t>();
    ckpt.config = parse_config(doc.at("config").dump());
    for (const json& p : doc.at("params")) {
      ckpt.params.add(p.at("name").get<std::string>(),
                      DenseArray(p.at("shape").get<std::vector<std::size_t>>(),
                                 p.at("values").get<std::vector<double>>()));
    }
    const json& opt = doc.at("optimizer");
    AdamConfig oc{opt.at("lr").get<double>(), opt.at("beta1").get<double>(),
                  opt.at("beta2").get<double>(), opt.at("epsilon").get<double>()};
    ckpt.optimizer = AdamState::for_params(ckpt.params, oc);
    ckpt.optimizer.step = opt.at("step").get<std::uint64_t>();
    const json& first = opt.at("first_moment");
    const json& second = opt.at("second_moment");
    const auto entries = ckpt.params.entries();
    if (first.size() != entries.size() || second.size() != entries.size()) {
      throw DimensionError("optimizer moments do not match parameter count");
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
      ckpt.optimizer.first_moment[i] =
          DenseArray(entries[i].value.shape(), first[i].get<std::vector<double>>());
      ckpt.optimizer.second_moment[i] =
          DenseArray(entries[i].value.shape(), second[i].get<std::vector<double>>());
    }
    return ckpt;
  });
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

std::string serialize_dataset(const Dataset& ds) {
  json spec = {
      {"num_speakers", ds.spec.num_speakers}, {"num_tokens", ds.spec.num_tokens},
      {"speaker_dims", ds.spec.speaker_dims}, {"token_dims", ds.spec.token_dims},
      {"frames", ds.spec.frames},             {"prompt_frames", ds.spec.prompt_frames},
      {"data_noise", ds.spec.data_noise},     {"min_separation", ds.spec.min_separation},
  };
  json doc = {
      {"format", kDatasetFormat},
      {"version", kDatasetVersion},
      {"spec", std::move(spec)},
      {"prototypes", prototypes_to_json(ds.prototypes)},
      {"train_speakers", ds.train_speakers},
      {"test_speakers", ds.test_speakers},
      {"train", utterances_to_json(ds.train)},
      {"test", utterances_to_json(ds.test)},
  };
  return doc.dump() + "\n";
}

Dataset parse_dataset(std::string_view bytes) {
  const json doc = parse_document(bytes, kDatasetFormat);
  const int version = with_schema_errors("dataset", [&] { return doc.at("version").get<int>(); });
  if (version != kDatasetVersion) {
    throw ContractError("dataset: format version " + std::to_string(version) + " is not supported");
  }
  return with_schema_errors("dataset", [&] {
    Dataset ds;
    const json& s = doc.at("spec");
    ds.spec.num_speakers = s.at("num_speakers").get<std::size_t>();
    ds.spec.num_tokens = s.at("num_tokens").get<std::size_t>();
    ds.spec.speaker_dims = s.at("speaker_dims").get<std::size_t>();
    ds.spec.token_dims = s.at("token_dims").get<std::size_t>();
    ds.spec.frames = s.at("frames").get<std::size_t>();
    ds.spec.prompt_frames = s.at("prompt_frames").get<std::size_t>();
    ds.spec.data_noise = s.at("data_noise").get<double>();
    ds.spec.min_separation = s.at("min_separation").get<double>();
    const json& p = doc.at("prototypes");
    ds.prototypes.speaker_offsets = array_from_json(p.at("speaker_offsets"));
    ds.prototypes.token_patterns = array_from_json(p.at("token_patterns"));
    ds.train_speakers = doc.at("train_speakers").get<std::vector<int>>();
    ds.test_speakers = doc.at("test_speakers").get<std::vector<int>>();
    ds.train = utterances_from_json(doc.at("train"));
    ds.test = utterances_from_json(doc.at("test"));
    return ds;
  });
}

}  // namespace flowgrpo
