#include "memdialog/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "memdialog/benchmark.hpp"

namespace memdialog {

using nlohmann::json;

std::string Checkpoint::id() const {
  std::ostringstream s;
  s << to_string(config.model.nlg) << '-' << to_string(config.model.encoding) << "-task"
    << config.task << '-' << std::hex << std::setw(16) << std::setfill('0')
    << params_checksum(model);
  return s.str();
}

json to_json(const ModelConfig& c) {
  return {{"nlg", to_string(c.nlg)},
          {"encoding", to_string(c.encoding)},
          {"dim", c.dim},
          {"hops", c.hops},
          {"hidden", c.hidden},
          {"context_words", c.context_words},
          {"activation", to_string(c.activation)},
          {"hidden_bias", c.hidden_bias},
          {"untied_embeddings", c.untied_embeddings},
          {"query_bow_override", c.query_bow_override},
          {"time_on_query", c.time_on_query},
          {"init_mean", c.init_mean},
          {"init_std", c.init_std},
          {"decoder_init_range", c.decoder_init_range}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.nlg = parse_nlg(j.at("nlg").get<std::string>());
  c.encoding = parse_encoding(j.at("encoding").get<std::string>());
  c.dim = j.at("dim").get<std::size_t>();
  c.hops = j.at("hops").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.context_words = j.at("context_words").get<std::size_t>();
  c.activation = parse_activation(j.at("activation").get<std::string>());
  c.hidden_bias = j.at("hidden_bias").get<bool>();
  c.untied_embeddings = j.at("untied_embeddings").get<bool>();
  c.query_bow_override = j.at("query_bow_override").get<bool>();
  c.time_on_query = j.at("time_on_query").get<bool>();
  c.init_mean = j.at("init_mean").get<double>();
  c.init_std = j.at("init_std").get<double>();
  c.decoder_init_range = j.at("decoder_init_range").get<double>();
  return c;
}

json to_json(const TrainConfig& c) {
  return {{"task", c.task},
          {"model", to_json(c.model)},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"eval_every", c.eval_every},
          {"seed", c.seed},
          {"runs", c.runs},
          {"dummy_candidates", c.dummy_candidates}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.task = j.at("task").get<int>();
  c.model = model_config_from_json(j.at("model"));
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.eval_every = j.at("eval_every").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.runs = j.at("runs").get<std::size_t>();
  c.dummy_candidates = j.at("dummy_candidates").get<std::size_t>();
  return c;
}

json to_json(const EvalPoint& p) {
  return {{"epoch", p.epoch}, {"train_loss", p.train_loss}, {"val_accuracy", p.val_accuracy}};
}

namespace {

class Writer {
 public:
  void bytes(const void* data, std::size_t n) { out_.append(static_cast<const char*>(data), n); }
  template <typename U>
  void uint(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    uint(bits);
  }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  std::string_view take(std::size_t n, const char* what) {
    if (data_.size() - pos_ < n)
      throw CheckpointTruncatedError("checkpoint truncated while reading " + std::string(what) +
                                     " at byte " + std::to_string(pos_));
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename U>
  U uint(const char* what) {
    const auto s = take(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<U>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  float f32() {
    const auto bits = uint<std::uint32_t>("tensor data");
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(std::string_view bytes) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  for (std::size_t off = 0; off < bytes.size(); off += (1u << 30)) {
    const auto n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    c = crc32(c, reinterpret_cast<const Bytef*>(bytes.data() + off), static_cast<uInt>(n));
  }
  return static_cast<std::uint32_t>(c);
}

struct TensorBlock {
  std::string name;
  std::uint32_t rows, cols;
  std::size_t data_offset;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  json candidates = json::array();
  for (const auto& r : ckpt.model.candidates().responses()) candidates.push_back(r);
  json history = json::array();
  for (const auto& p : ckpt.history) history.push_back(to_json(p));
  const auto& pre = ckpt.model.preprocessing();
  const json meta = {{"config", to_json(ckpt.config)},
                     {"vocabulary", ckpt.model.vocabulary().words()},
                     {"candidates", candidates},
                     {"preprocessing",
                      {{"time_keywords", pre.time_keywords},
                       {"max_utterance_len", pre.max_utterance_len},
                       {"max_response_len", pre.max_response_len}}},
                     {"epoch", ckpt.epoch},
                     {"val_accuracy", ckpt.val_accuracy},
                     {"history", history},
                     {"id", ckpt.id()}};
  const std::string text = meta.dump();

  Writer w;
  w.bytes(kCheckpointMagic, sizeof kCheckpointMagic);
  w.uint<std::uint32_t>(kCheckpointVersion);
  w.uint<std::uint64_t>(text.size());
  w.bytes(text.data(), text.size());
  const auto tensors = ckpt.model.params().tensors();
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.uint<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(t.tensor->rows()));
    w.uint<std::uint32_t>(static_cast<std::uint32_t>(t.tensor->cols()));
    for (float v : t.tensor->values()) w.f32(v);
  }
  w.uint<std::uint32_t>(crc(w.str()));
  return std::move(w.str());
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  const std::string_view magic(kCheckpointMagic, sizeof kCheckpointMagic);
  if (bytes.size() < magic.size()) {
    if (magic.starts_with(bytes)) throw CheckpointTruncatedError("checkpoint truncated in magic bytes");
    throw CheckpointFormatError("not a checkpoint: bad magic bytes");
  }
  if (bytes.substr(0, magic.size()) != magic)
    throw CheckpointFormatError("not a checkpoint: bad magic bytes");

  Reader r(bytes);
  r.take(magic.size(), "magic");
  const auto version = r.uint<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw CheckpointVersionError("checkpoint version " + std::to_string(version) +
                                 " unsupported (expected " + std::to_string(kCheckpointVersion) + ")");
  const auto meta_len = r.uint<std::uint64_t>("metadata length");
  const auto meta_text = r.take(meta_len, "metadata");
  const auto count = r.uint<std::uint32_t>("tensor count");
  std::vector<TensorBlock> blocks;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.uint<std::uint16_t>("tensor name length");
    TensorBlock b;
    b.name = std::string(r.take(name_len, "tensor name"));
    b.rows = r.uint<std::uint32_t>("tensor rows");
    b.cols = r.uint<std::uint32_t>("tensor cols");
    b.data_offset = r.pos();
    r.take(std::size_t{4} * b.rows * b.cols, "tensor data");
    blocks.push_back(std::move(b));
  }
  const auto body_end = r.pos();
  const auto stored = r.uint<std::uint32_t>("checksum");
  if (r.remaining() != 0)
    throw CheckpointFormatError(std::to_string(r.remaining()) + " trailing bytes after checksum");
  if (crc(bytes.substr(0, body_end)) != stored) throw CheckpointChecksumError("checkpoint checksum mismatch");

  json meta;
  try {
    meta = json::parse(meta_text);
    const auto config = train_config_from_json(meta.at("config"));
    auto vocab = Vocabulary::from_words(meta.at("vocabulary").get<std::vector<std::string>>());
    CandidateSet candidates;
    for (const auto& c : meta.at("candidates")) candidates.add(c.get<Tokens>());
    const auto& p = meta.at("preprocessing");
    Preprocessing pre{p.at("time_keywords").get<std::size_t>(),
                      p.at("max_utterance_len").get<std::size_t>(),
                      p.at("max_response_len").get<std::size_t>()};
    Checkpoint ckpt{config,
                    DialogModel<float>(config.model, std::move(vocab), std::move(candidates), pre, 0),
                    meta.at("epoch").get<std::size_t>(),
                    meta.at("val_accuracy").get<double>(),
                    {}};
    for (const auto& h : meta.at("history"))
      ckpt.history.push_back({h.at("epoch").get<std::size_t>(), h.at("train_loss").get<double>(),
                              h.at("val_accuracy").get<double>()});

    auto tensors = ckpt.model.params().tensors();
    if (tensors.size() != blocks.size())
      throw CheckpointFormatError("checkpoint has " + std::to_string(blocks.size()) +
                                  " tensors, configuration expects " + std::to_string(tensors.size()));
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const auto& b = blocks[i];
      auto& t = *tensors[i].tensor;
      if (b.name != tensors[i].name || b.rows != t.rows() || b.cols != t.cols())
        throw CheckpointFormatError("tensor " + std::to_string(i) + " is " + b.name + " " +
                                    std::to_string(b.rows) + "x" + std::to_string(b.cols) +
                                    ", expected " + tensors[i].name + " " +
                                    std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
      Reader data(bytes.substr(b.data_offset, std::size_t{4} * b.rows * b.cols));
      for (auto& v : t.values()) v = data.f32();
    }
    ckpt.model.refresh();
    return ckpt;
  } catch (const json::exception& e) {
    throw CheckpointFormatError(std::string("bad checkpoint metadata: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointFormatError(std::string("bad checkpoint metadata: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return deserialize_checkpoint(buf.str());
  } catch (const CheckpointError& e) {
    // keep the concrete type
    const std::string msg = path.string() + ": " + e.what();
    if (dynamic_cast<const CheckpointVersionError*>(&e)) throw CheckpointVersionError(msg);
    if (dynamic_cast<const CheckpointTruncatedError*>(&e)) throw CheckpointTruncatedError(msg);
    if (dynamic_cast<const CheckpointChecksumError*>(&e)) throw CheckpointChecksumError(msg);
    throw CheckpointFormatError(msg);
  }
}

void require_head(const Checkpoint& ckpt, NlgKind needed, std::string_view entry_point) {
  if (ckpt.config.model.nlg != needed)
    throw CheckpointMismatchError(std::string(entry_point) + " needs a " +
                                  std::string(to_string(needed)) + " checkpoint, got a " +
                                  std::string(to_string(ckpt.config.model.nlg)) + " checkpoint");
}

void write_metrics_record(std::ostream& out, const EvalPoint& p, std::size_t run, std::uint64_t seed) {
  auto j = to_json(p);
  j["run"] = run;
  j["seed"] = seed;
  out << j.dump() << '\n';
}

}  // namespace memdialog
