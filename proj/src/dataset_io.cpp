#include <cstdint>
#include <string>

#include "binary_io.hpp"
#include "json_io.hpp"
#include "mmpc/channel.hpp"
#include "mmpc/error.hpp"

namespace mmpc {

namespace {

constexpr std::string_view kMagic = "MMPC";
constexpr std::uint32_t kVersion = 1;

char split_code(Split s) {
  switch (s) {
    case Split::kTrain: return 't';
    case Split::kVal: return 'v';
    case Split::kTest: return 'e';
    case Split::kUnassigned: break;
  }
  return '-';
}

Split split_from_code(char c) {
  switch (c) {
    case 't': return Split::kTrain;
    case 'v': return Split::kVal;
    case 'e': return Split::kTest;
    case '-': return Split::kUnassigned;
    default: throw FormatError("corrupt file");
  }
}

}  // namespace

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  const auto n_u = dataset.n_users();
  const auto n_t = dataset.n_antennas();
  for (const auto& h : dataset.scenarios) {
    if (static_cast<std::size_t>(h.rows()) != n_u || static_cast<std::size_t>(h.cols()) != n_t) {
      throw Error("scenarios differ in shape");
    }
  }
  if (dataset.is_split() && dataset.splits.size() != dataset.size()) {
    throw Error("split tags do not match scenario count");
  }

  nlohmann::json meta;
  meta["generator"] = dataset.config ? nlohmann::json(*dataset.config) : nlohmann::json(nullptr);
  std::string splits;
  for (auto s : dataset.splits) splits.push_back(split_code(s));
  meta["splits"] = splits;
  const std::string meta_text = meta.dump();

  detail::ByteWriter w;
  w.put_bytes(kMagic);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dataset.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(n_u));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(n_t));
  w.put<double>(dataset.sigma2);
  w.put<double>(dataset.p_max);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(meta_text.size()));
  w.put_bytes(meta_text);
  for (const auto& h : dataset.scenarios) {
    for (Eigen::Index u = 0; u < h.rows(); ++u) {
      for (Eigen::Index n = 0; n < h.cols(); ++n) {
        w.put<float>(static_cast<float>(h(u, n).real()));
        w.put<float>(static_cast<float>(h(u, n).imag()));
      }
    }
  }
  detail::write_file_atomic(path, w.bytes().data(), w.bytes().size());
}

Dataset load_dataset(const std::filesystem::path& path) {
  detail::ByteReader r(detail::read_file(path));
  if (r.remaining() < kMagic.size() + sizeof(std::uint32_t)) throw FormatError("corrupt file");
  if (r.get_bytes(kMagic.size()) != kMagic) throw FormatError("unsupported format");
  if (r.get<std::uint32_t>() != kVersion) throw FormatError("unsupported format");

  const auto n_scen = r.get<std::uint32_t>();
  const auto n_u = r.get<std::uint32_t>();
  const auto n_t = r.get<std::uint32_t>();
  Dataset dataset;
  dataset.sigma2 = r.get<double>();
  dataset.p_max = r.get<double>();
  const auto meta_len = r.get<std::uint32_t>();
  const auto meta_text = r.get_bytes(meta_len);

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_text);
    if (meta.contains("generator") && !meta["generator"].is_null()) {
      dataset.config = meta["generator"].get<ScenarioConfig>();
    }
    for (char c : meta.value("splits", std::string{})) dataset.splits.push_back(split_from_code(c));
  } catch (const nlohmann::json::exception&) {
    throw FormatError("corrupt file");
  }
  if (!dataset.splits.empty() && dataset.splits.size() != n_scen) throw FormatError("corrupt file");

  const std::size_t per_scenario = std::size_t{n_u} * n_t;
  if (r.remaining() != std::size_t{n_scen} * per_scenario * 2 * sizeof(float)) {
    throw FormatError("corrupt file");
  }
  std::vector<float> body(per_scenario * 2);
  dataset.scenarios.reserve(n_scen);
  for (std::uint32_t s = 0; s < n_scen; ++s) {
    r.get_array(body.data(), body.size());
    ChannelMatrix h(n_u, n_t);
    for (std::uint32_t u = 0; u < n_u; ++u) {
      for (std::uint32_t n = 0; n < n_t; ++n) {
        const std::size_t k = 2 * (std::size_t{u} * n_t + n);
        h(u, n) = cdouble(body[k], body[k + 1]);
      }
    }
    dataset.scenarios.push_back(std::move(h));
  }
  return dataset;
}

std::uint64_t file_hash(const std::filesystem::path& path) {
  const auto bytes = detail::read_file(path);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

}  // namespace mmpc
