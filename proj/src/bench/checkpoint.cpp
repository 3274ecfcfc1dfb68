// Copyright 2026 The fmplug-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <json.hpp>
#include <memory>
#include <stdexcept>

#include "byte_io.hpp"
#include "fmplug/bench.hpp"
#include "fmplug/errors.hpp"

namespace fmplug::bench {

using nlohmann::json;

namespace {
constexpr std::string_view kMagic = "FMPL";
}

std::string encode_checkpoint(const flow::FlowModel& model) {
  const auto* mlp = model.mlp();
  if (!mlp) throw std::invalid_argument("only MLP velocity models can be checkpointed");
  const auto& spec = mlp->spec();

  json header;
  header["dim"] = spec.dim;
  header["hidden"] = spec.hidden;
  header["time_features"] = spec.time_features;
  header["activation"] = "tanh";
  header["output"] = std::string(flow::to_string(spec.output));
  header["path"] = "linear";
  header["parameter_count"] = spec.parameter_count();
  header["training"] = {{"seed", model.meta.seed},
                        {"steps", model.meta.steps},
                        {"plateau_warning", model.meta.plateau_warning},
                        {"loss_trace", model.meta.loss_trace}};
  const std::string text = header.dump();

  std::string out(kMagic);
  io::put_u32(out, kCheckpointVersion);
  io::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const auto& p : mlp->parameters())
    for (double v : p.values()) io::put_f64(out, v);
  return out;
}

flow::FlowModel decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw FormatError("not a checkpoint");
  }
  io::Reader in(bytes.substr(kMagic.size()), "corrupt checkpoint");
  const auto version = in.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported version " + std::to_string(version));
  }
  const auto header_len = in.u32();
  json header;
  try {
    header = json::parse(in.take(header_len));
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt checkpoint: bad header: ") + e.what());
  }

  flow::MlpSpec spec;
  std::size_t declared = 0;
  flow::TrainingMeta meta;
  try {
    spec.dim = header.at("dim").get<std::size_t>();
    spec.hidden = header.at("hidden").get<std::vector<std::size_t>>();
    spec.time_features = header.at("time_features").get<std::size_t>();
    declared = header.at("parameter_count").get<std::size_t>();
    const auto output = flow::parse_output(header.at("output").get<std::string>());
    if (!output) throw FormatError("corrupt checkpoint: unknown output parameterization");
    spec.output = *output;
    if (header.at("path").get<std::string>() != "linear" ||
        header.at("activation").get<std::string>() != "tanh") {
      throw FormatError("corrupt checkpoint: unknown path or activation");
    }
    const auto& tr = header.at("training");
    meta.seed = tr.at("seed").get<std::uint64_t>();
    meta.steps = tr.at("steps").get<std::size_t>();
    meta.plateau_warning = tr.at("plateau_warning").get<bool>();
    meta.loss_trace = tr.at("loss_trace").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("corrupt checkpoint: ") + e.what());
  }
  if (spec.dim == 0) throw FormatError("corrupt checkpoint: zero dimension");
  if (declared != spec.parameter_count()) {
    throw FormatError("corrupt checkpoint: header declares " + std::to_string(declared) +
                      " parameters, architecture needs " + std::to_string(spec.parameter_count()));
  }
  if (in.remaining() != declared * 8) {
    throw FormatError("corrupt checkpoint: payload holds " + std::to_string(in.remaining()) +
                      " bytes, expected " + std::to_string(declared * 8));
  }

  const auto shapes = flow::MlpVelocity::zeros(spec).parameter_shapes();
  std::vector<num::Tensor> params;
  for (const auto& shape : shapes) {
    std::vector<double> v(num::numel(shape));
    for (auto& x : v) x = in.f64();
    params.emplace_back(shape, std::move(v));
  }
  flow::FlowModel model;
  model.velocity = std::make_shared<const flow::MlpVelocity>(spec, std::move(params));
  model.meta = std::move(meta);
  return model;
}

void save_checkpoint(const flow::FlowModel& model, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(model));
}

flow::FlowModel load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

}  // namespace fmplug::bench
