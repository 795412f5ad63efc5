#include <cstdint>
#include <string>

#include "binary_io.hpp"
#include "json_io.hpp"
#include "mmpc/error.hpp"
#include "mmpc/net.hpp"

namespace mmpc {

namespace {

constexpr std::string_view kMagic = "MMPN";
constexpr std::uint32_t kVersion = 1;

// Every stored tensor in declaration order; matrices are column-major.
template <typename Params>
auto all_tensors(Params& p) {
  using Ptr = std::conditional_t<std::is_const_v<Params>, const double*, double*>;
  struct Tensor {
    Ptr data;
    std::size_t size;
  };
  std::vector<Tensor> out;
  auto add = [&](auto& m) { out.push_back({m.data(), static_cast<std::size_t>(m.size())}); };
  auto add_bn = [&](auto& bn) {
    add(bn.gamma);
    add(bn.beta);
    add(bn.running_mean);
    add(bn.running_var);
  };
  add(p.conv_w);
  add(p.conv_b);
  add_bn(p.bn_conv);
  add(p.fc1_w);
  add(p.fc1_b);
  add_bn(p.bn1);
  add(p.fc2_w);
  add(p.fc2_b);
  add_bn(p.bn2);
  add(p.fc3_w);
  add(p.fc3_b);
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto& p = checkpoint.params;
  nlohmann::json desc;
  desc["arch"] = p.arch;
  desc["input_scale"] = p.input_scale;
  if (checkpoint.quant) {
    checkpoint.quant->validate();
    desc["quant"] = {{"bits", checkpoint.quant->config}, {"step", checkpoint.quant->step}};
  } else {
    desc["quant"] = nullptr;
  }
  const std::string text = desc.dump();

  detail::ByteWriter w;
  w.put_bytes(kMagic);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(text.size()));
  w.put_bytes(text);
  for (const auto& t : all_tensors(p)) w.put_array(t.data, t.size);
  detail::write_file_atomic(path, w.bytes().data(), w.bytes().size());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  detail::ByteReader r(detail::read_file(path));
  if (r.remaining() < kMagic.size() + sizeof(std::uint32_t) || r.get_bytes(kMagic.size()) != kMagic ||
      r.get<std::uint32_t>() != kVersion) {
    throw FormatError("unsupported format");
  }
  Checkpoint ck;
  try {
    const auto desc = nlohmann::json::parse(r.get_bytes(r.get<std::uint32_t>()));
    const auto arch = desc.at("arch").get<ArchConfig>();
    arch.validate();
    ck.params = NetworkParams::zeros(arch);
    ck.params.input_scale = desc.at("input_scale").get<double>();
    if (!desc.at("quant").is_null()) {
      LsqState q;
      q.config = desc["quant"].at("bits").get<QuantConfig>();
      q.step = desc["quant"].at("step").get<std::array<double, kNumLayers>>();
      q.validate();
      ck.quant = q;
    }
  } catch (const nlohmann::json::exception&) {
    throw FormatError("corrupt file");
  } catch (const Error&) {
    throw FormatError("corrupt file");
  }
  for (const auto& t : all_tensors(ck.params)) r.get_array(t.data, t.size);
  if (r.remaining() != 0) throw FormatError("corrupt file");
  return ck;
}

}  // namespace mmpc
