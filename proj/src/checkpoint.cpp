// Copyright 2026 The vmfkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "vmfkit/checkpoint.hpp"

#include <array>
#include <cstdio>
#include <cstring>
#include <map>
#include <sstream>
#include <vector>

namespace vmfkit {
namespace {

constexpr int kFormatVersion = 1;
constexpr char kMagic[] = "vmfkit-ckpt";
constexpr Eigen::Index kDoublesPerLine = 64;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kPrelu:
      return "prelu";
  }
  return "identity";
}

Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "prelu") return Activation::kPrelu;
  throw CheckpointError("unknown activation '" + name + "'");
}

const char* loss_name(LossKind k) {
  switch (k) {
    case LossKind::kVmfml:
      return "vmfml";
    case LossKind::kVmfmlMargin:
      return "vmfml-margin";
    case LossKind::kSoftmax:
      return "softmax";
    case LossKind::kSoftmaxCenter:
      return "softmax-center";
  }
  return "vmfml";
}

LossKind loss_from_name(const std::string& name) {
  if (name == "vmfml") return LossKind::kVmfml;
  if (name == "vmfml-margin") return LossKind::kVmfmlMargin;
  if (name == "softmax") return LossKind::kSoftmax;
  if (name == "softmax-center") return LossKind::kSoftmaxCenter;
  throw CheckpointError("unknown loss kind '" + name + "'");
}

void append_le_bytes(double v, std::string& payload) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int b = 0; b < 8; ++b) {
    payload.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
  }
}

double double_from_le_bytes(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 7; b >= 0; --b) bits = (bits << 8) | p[b];
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

class Writer {
 public:
  void header_line(const std::string& line) {
    out_ << line << '\n';
  }

  void tensor(const std::string& name, const Matrix& m) {
    out_ << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    std::string bytes;
    bytes.reserve(static_cast<std::size_t>(m.size()) * 8);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        append_le_bytes(m(r, c), bytes);
      }
    }
    payload_ += bytes;
    static const char* hex = "0123456789abcdef";
    Eigen::Index written = 0;
    for (std::size_t i = 0; i < bytes.size(); ++i) {
      const auto byte = static_cast<unsigned char>(bytes[i]);
      out_ << hex[byte >> 4] << hex[byte & 0xf];
      if (i % 8 == 7 && ++written == kDoublesPerLine) {
        out_ << '\n';
        written = 0;
      }
    }
    if (written != 0 || bytes.empty()) out_ << '\n';
  }

  void tensor(const std::string& name, const Vector& v) {
    tensor(name, Matrix(v.transpose()));
  }

  void scalar(const std::string& name, double v) {
    tensor(name, Matrix(Matrix::Constant(1, 1, v)));
  }

  std::string finish() {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08x",
                  crc32(payload_.data(), payload_.size()));
    out_ << "crc32 " << buf << '\n';
    return out_.str();
  }

 private:
  std::ostringstream out_;
  std::string payload_;
};

class Reader {
 public:
  explicit Reader(const std::string& bytes) : in_(bytes) {}

  std::string next_line() {
    std::string line;
    if (!std::getline(in_, line)) {
      throw CheckpointError("checkpoint truncated");
    }
    return line;
  }

  // "key=value" tokens from a header line.
  static std::map<std::string, std::string> parse_fields(
      const std::string& line) {
    std::map<std::string, std::string> fields;
    std::istringstream tokens(line);
    std::string tok;
    while (tokens >> tok) {
      const auto eq = tok.find('=');
      if (eq != std::string::npos) {
        fields[tok.substr(0, eq)] = tok.substr(eq + 1);
      }
    }
    return fields;
  }

  Matrix read_tensor(const std::string& expected_name) {
    const std::string head = next_line();
    std::istringstream tokens(head);
    std::string tag, name;
    Eigen::Index rows = -1, cols = -1;
    tokens >> tag >> name >> rows >> cols;
    if (tag != "tensor" || name != expected_name || rows < 0 || cols < 0) {
      throw CheckpointError("expected tensor '" + expected_name +
                            "', found '" + head + "'");
    }
    const std::size_t need = static_cast<std::size_t>(rows) *
                             static_cast<std::size_t>(cols) * 16;
    std::string hex;
    hex.reserve(need);
    while (hex.size() < need) {
      const std::string line = next_line();
      hex += line;
    }
    if (hex.size() != need) {
      throw CheckpointError("tensor '" + expected_name +
                            "' has trailing characters");
    }
    std::array<unsigned char, 8> bytes{};
    Matrix m(rows, cols);
    std::size_t pos = 0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        for (int b = 0; b < 8; ++b) {
          bytes[static_cast<std::size_t>(b)] = static_cast<unsigned char>(
              (hex_nibble(hex[pos]) << 4) | hex_nibble(hex[pos + 1]));
          pos += 2;
        }
        m(r, c) = double_from_le_bytes(bytes.data());
        for (int b = 0; b < 8; ++b) {
          payload_.push_back(static_cast<char>(bytes[static_cast<std::size_t>(b)]));
        }
      }
    }
    return m;
  }

  double read_scalar(const std::string& name) {
    const Matrix m = read_tensor(name);
    if (m.rows() != 1 || m.cols() != 1) {
      throw CheckpointError("scalar '" + name + "' has wrong shape");
    }
    return m(0, 0);
  }

  void verify_crc() {
    const std::string line = next_line();
    std::istringstream tokens(line);
    std::string tag, hexval;
    tokens >> tag >> hexval;
    if (tag != "crc32" || hexval.size() != 8) {
      throw CheckpointError("missing crc32 trailer");
    }
    const auto stored =
        static_cast<std::uint32_t>(std::stoul(hexval, nullptr, 16));
    if (stored != crc32(payload_.data(), payload_.size())) {
      throw CheckpointError("payload checksum mismatch");
    }
  }

 private:
  static int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw CheckpointError("invalid hex character in payload");
  }

  std::istringstream in_;
  std::string payload_;
};

// First-line check shared by every loader.
std::map<std::string, std::string> check_magic(Reader& reader) {
  const std::string first = reader.next_line();
  if (first.rfind(kMagic, 0) != 0) {
    throw CheckpointError("not a vmfkit checkpoint");
  }
  auto fields = Reader::parse_fields(first);
  const auto version = fields.find("version");
  if (version == fields.end()) {
    throw CheckpointError("checkpoint has no version tag");
  }
  if (std::stoi(version->second) != kFormatVersion) {
    throw CheckpointError("unsupported checkpoint version " +
                          version->second);
  }
  return fields;
}

}  // namespace

std::uint32_t crc32(const void* data, std::size_t size) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) {
        c = (c & 1u) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      }
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t c = 0xffffffffu;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    c = table[(c ^ p[i]) & 0xffu] ^ (c >> 8);
  }
  return c ^ 0xffffffffu;
}

std::string save_checkpoint(const Classifier& clf) {
  Writer w;
  w.header_line(std::string(kMagic) + " version=1 kind=model");
  std::string loss_line = std::string("loss=") + loss_name(clf.loss_kind);
  if (clf.vmfml) {
    loss_line += " classes=" + std::to_string(clf.vmfml->num_classes());
    loss_line += std::string(" kappa_policy=") +
                 (clf.vmfml->kappa_policy().mode == KappaPolicy::Mode::kFixed
                      ? "fixed"
                      : "learned");
    loss_line +=
        " lr_multiplier=" + format_double(clf.vmfml->kappa_policy().lr_multiplier);
    loss_line += " margin=" + format_double(clf.vmfml->margin());
  }
  if (clf.softmax) {
    loss_line += " classes=" + std::to_string(clf.softmax->weights.rows());
  }
  if (clf.center) {
    loss_line += " center_weight=" + format_double(clf.center->weight);
    loss_line += " center_rate=" + format_double(clf.center->center_update_rate);
  }
  w.header_line(loss_line);

  const auto& layers = clf.net.layers();
  w.header_line("net layers=" + std::to_string(layers.size()));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    w.header_line("layer " + std::to_string(l) +
                  " in=" + std::to_string(layers[l].weights.cols()) +
                  " out=" + std::to_string(layers[l].weights.rows()) +
                  " activation=" + activation_name(layers[l].activation));
  }

  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = "net." + std::to_string(l) + ".";
    w.tensor(prefix + "weights", layers[l].weights);
    w.tensor(prefix + "biases", layers[l].biases);
    if (layers[l].activation == Activation::kPrelu) {
      w.tensor(prefix + "alpha", layers[l].prelu_alpha);
    }
  }
  if (clf.vmfml) {
    w.tensor("head.weights", clf.vmfml->weights());
    w.scalar("head.kappa", clf.vmfml->kappa());
  }
  if (clf.softmax) {
    w.tensor("head.weights", clf.softmax->weights);
    w.tensor("head.biases", clf.softmax->biases);
  }
  if (clf.center) {
    w.tensor("head.centers", clf.center->centers);
  }
  return w.finish();
}

Classifier load_classifier_checkpoint(const std::string& bytes) {
  Reader reader(bytes);
  const auto magic_fields = check_magic(reader);
  if (magic_fields.at("kind") != "model") {
    throw CheckpointError("checkpoint kind is not 'model'");
  }

  const auto loss_fields = Reader::parse_fields(reader.next_line());
  const LossKind kind = loss_from_name(loss_fields.at("loss"));

  const auto net_fields = Reader::parse_fields(reader.next_line());
  const int num_layers = std::stoi(net_fields.at("layers"));
  if (num_layers < 1) throw CheckpointError("model has no layers");

  std::vector<DenseLayer> layers(static_cast<std::size_t>(num_layers));
  for (int l = 0; l < num_layers; ++l) {
    const auto fields = Reader::parse_fields(reader.next_line());
    layers[static_cast<std::size_t>(l)].activation =
        activation_from_name(fields.at("activation"));
  }
  for (int l = 0; l < num_layers; ++l) {
    DenseLayer& layer = layers[static_cast<std::size_t>(l)];
    const std::string prefix = "net." + std::to_string(l) + ".";
    layer.weights = reader.read_tensor(prefix + "weights");
    layer.biases = reader.read_tensor(prefix + "biases").row(0).transpose();
    if (layer.activation == Activation::kPrelu) {
      layer.prelu_alpha =
          reader.read_tensor(prefix + "alpha").row(0).transpose();
    }
  }

  Classifier clf;
  clf.loss_kind = kind;
  if (kind == LossKind::kVmfml || kind == LossKind::kVmfmlMargin) {
    Matrix weights = reader.read_tensor("head.weights");
    const double kappa = reader.read_scalar("head.kappa");
    KappaPolicy policy =
        loss_fields.at("kappa_policy") == "fixed"
            ? KappaPolicy::fixed()
            : KappaPolicy::learned(std::stod(loss_fields.at("lr_multiplier")));
    clf.vmfml = VmfmlHead(std::move(weights), kappa, policy,
                          std::stod(loss_fields.at("margin")));
  } else {
    SoftmaxHead head;
    head.weights = reader.read_tensor("head.weights");
    head.biases = reader.read_tensor("head.biases").row(0).transpose();
    clf.softmax = std::move(head);
    if (kind == LossKind::kSoftmaxCenter) {
      CenterRegularizer center;
      center.centers = reader.read_tensor("head.centers");
      center.weight = std::stod(loss_fields.at("center_weight"));
      center.center_update_rate = std::stod(loss_fields.at("center_rate"));
      clf.center = std::move(center);
    }
  }
  reader.verify_crc();
  clf.net = DenseNetwork(std::move(layers));
  return clf;
}

std::string save_mixture_checkpoint(const VmfMixture& mixture) {
  Writer w;
  w.header_line(std::string(kMagic) + " version=1 kind=mixture");
  w.header_line("mixture components=" + std::to_string(mixture.size()) +
                " dim=" + std::to_string(mixture.dim()));
  Matrix means(mixture.size(), mixture.dim());
  Vector kappas(mixture.size());
  for (int j = 0; j < mixture.size(); ++j) {
    means.row(j) = mixture.component(j).mean_direction().coords().transpose();
    kappas(j) = mixture.component(j).concentration();
  }
  w.tensor("mixture.weights", mixture.weights());
  w.tensor("mixture.means", means);
  w.tensor("mixture.kappas", kappas);
  return w.finish();
}

VmfMixture load_mixture_checkpoint(const std::string& bytes) {
  Reader reader(bytes);
  const auto magic_fields = check_magic(reader);
  if (magic_fields.at("kind") != "mixture") {
    throw CheckpointError("checkpoint kind is not 'mixture'");
  }
  const auto fields = Reader::parse_fields(reader.next_line());
  const int m = std::stoi(fields.at("components"));
  const Vector weights =
      reader.read_tensor("mixture.weights").row(0).transpose();
  const Matrix means = reader.read_tensor("mixture.means");
  const Vector kappas = reader.read_tensor("mixture.kappas").row(0).transpose();
  reader.verify_crc();
  if (means.rows() != m || weights.size() != m || kappas.size() != m) {
    throw CheckpointError("mixture tensor shapes are inconsistent");
  }
  std::vector<VmfComponent> components;
  components.reserve(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    components.emplace_back(UnitVector(means.row(j).transpose()), kappas(j));
  }
  return VmfMixture(std::move(components), weights);
}

CheckpointKind checkpoint_kind(const std::string& bytes) {
  Reader reader(bytes);
  const auto fields = check_magic(reader);
  const auto kind = fields.find("kind");
  if (kind == fields.end()) throw CheckpointError("checkpoint has no kind");
  if (kind->second == "model") return CheckpointKind::kModel;
  if (kind->second == "mixture") return CheckpointKind::kMixture;
  throw CheckpointError("unknown checkpoint kind '" + kind->second + "'");
}

}  // namespace vmfkit
