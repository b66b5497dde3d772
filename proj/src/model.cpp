#include "cystonet/model.hpp"

#include <cmath>
#include <sstream>

#include "cystonet/rng.hpp"

namespace cysto {

void ModelConfig::validate() const {
    if (stages() < 2) raise(ErrorKind::InvalidArgument, "need at least two stages");
    for (int c : stage_channels)
        if (c < 1) raise(ErrorKind::InvalidArgument, "stage channels must be positive");
    if (in_channels < 1 || num_classes < 2) raise(ErrorKind::InvalidArgument, "bad channel/class counts");
    const int down = 1 << (stages() - 1);
    if (input_h % down != 0 || input_w % down != 0)
        raise(ErrorKind::InvalidArgument,
              "input size " + std::to_string(input_h) + "x" + std::to_string(input_w) +
                  " is not divisible by " + std::to_string(down));
    if (ablation.use_transformer) {
        transformer.validate();
        if (transformer.embed_dim != stage_channels.back())
            raise(ErrorKind::InvalidArgument, "transformer embed_dim must equal the deepest stage width");
    }
    if (gate_token_budget < 1) raise(ErrorKind::InvalidArgument, "token budget must be positive");
}

void ConvBlockParams::collect(const std::string& prefix, NamedTensors& out) const {
    conv.collect(prefix + ".conv", out);
    bn.collect(prefix + ".bn", out);
}

ConvBlockParams make_conv_block(int c_in, int c_out, std::uint64_t seed) {
    ConvBlockParams p;
    p.conv = make_dw_separable(3, c_in, c_out, seed);
    p.bn = make_batchnorm(c_out);
    return p;
}

Tensor conv_block(const Tensor& x, ConvBlockParams& p, bool training) {
    return leaky_relu(batchnorm(dw_separable_conv(x, p.conv), p.bn, training), p.leaky_slope);
}

Model build_model(const ModelConfig& config) {
    config.validate();
    Model m;
    m.config = config;
    const auto& ch = config.stage_channels;
    const int s = config.stages();

    m.encoder.reserve(s);
    for (int i = 0; i < s; ++i)
        m.encoder.push_back(
            make_conv_block(i == 0 ? config.in_channels : ch[i - 1], ch[i], rng::key(config.seed, "enc", i)));

    if (config.ablation.use_transformer) {
        m.bottleneck_attn = make_transformer_block(config.transformer, rng::key(config.seed, "bottleneck"));
    } else {
        m.bottleneck_conv = make_conv_block(ch[s - 1], ch[s - 1], rng::key(config.seed, "bottleneck"));
    }

    if (config.ablation.use_dag) {
        m.gates.reserve(s - 1);
        for (int i = 0; i < s - 1; ++i)
            m.gates.push_back(make_dual_gate(ch[i], ch[i + 1], config.gate_mode, config.gate_variant,
                                             config.gate_token_budget, rng::key(config.seed, "gate", i)));
    }

    m.decoder.reserve(s - 1);
    for (int i = 0; i < s - 1; ++i)
        m.decoder.push_back(make_conv_block(ch[i + 1] + ch[i], ch[i], rng::key(config.seed, "dec", i)));

    m.head = make_conv2d(1, 1, ch[0], config.num_classes, 1, Padding::Same, rng::key(config.seed, "head"));
    return m;
}

NamedTensors Model::named_state() const {
    NamedTensors out;
    for (std::size_t i = 0; i < encoder.size(); ++i) encoder[i].collect("enc" + std::to_string(i), out);
    if (config.ablation.use_transformer)
        bottleneck_attn.collect("bottleneck", out);
    else
        bottleneck_conv.collect("bottleneck", out);
    for (std::size_t i = 0; i < gates.size(); ++i) gates[i].collect("gate" + std::to_string(i), out);
    for (std::size_t i = 0; i < decoder.size(); ++i) decoder[i].collect("dec" + std::to_string(i), out);
    head.collect("head", out);
    return out;
}

std::vector<Tensor> Model::trainable() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named_state())
        if (t.requires_grad()) out.push_back(t);
    return out;
}

Tensor model_forward(Model& m, const Tensor& images, bool training) {
    const auto& cfg = m.config;
    if (images.ndim() != 4 || images.dim(1) != cfg.input_h || images.dim(2) != cfg.input_w ||
        images.dim(3) != cfg.in_channels)
        raise(ErrorKind::Shape, "model input must be [N," + std::to_string(cfg.input_h) + "," +
                                    std::to_string(cfg.input_w) + "," + std::to_string(cfg.in_channels) +
                                    "], got " + shape_str(images.shape()));
    const int s = cfg.stages();
    std::vector<Tensor> skips;
    skips.reserve(s - 1);
    Tensor h = images;
    for (int i = 0; i < s; ++i) {
        h = conv_block(h, m.encoder[i], training);
        if (i < s - 1) {
            skips.push_back(h);
            h = maxpool2(h);
        }
    }

    h = cfg.ablation.use_transformer ? transformer_block(h, m.bottleneck_attn)
                                     : conv_block(h, m.bottleneck_conv, training);

    for (int i = s - 2; i >= 0; --i) {
        Tensor up = bilinear_resize(h, skips[i].dim(1), skips[i].dim(2));
        Tensor skip = cfg.ablation.use_dag ? apply_attention_gate(skips[i], up, m.gates[i]) : skips[i];
        h = conv_block(concat({up, skip}, 3), m.decoder[i], training);
    }
    return conv2d(h, m.head);
}

IntMask model_predict(Model& m, const Tensor& images) { return argmax_classes(model_forward(m, images, false)); }

namespace {

const char* kVariantNames[] = {"full", "shared", "weightless"};
const char* kGateModeNames[] = {"none", "spatial", "self", "dual"};

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    const auto b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

}  // namespace

const char* variant_name(SelfAttentionVariant v) { return kVariantNames[static_cast<int>(v)]; }

SelfAttentionVariant parse_variant(const std::string& s) {
    for (int i = 0; i < 3; ++i)
        if (s == kVariantNames[i]) return static_cast<SelfAttentionVariant>(i);
    raise(ErrorKind::InvalidArgument, "unknown attention variant '" + s + "' (full|shared|weightless)");
}

const char* gate_mode_name(GateMode m) { return kGateModeNames[static_cast<int>(m)]; }

GateMode parse_gate_mode(const std::string& s) {
    for (int i = 0; i < 4; ++i)
        if (s == kGateModeNames[i]) return static_cast<GateMode>(i);
    raise(ErrorKind::InvalidArgument, "unknown gate mode '" + s + "' (none|spatial|self|dual)");
}

std::string encode_model_config(const ModelConfig& c) {
    std::ostringstream out;
    out << "input_h = " << c.input_h << "\n";
    out << "input_w = " << c.input_w << "\n";
    out << "in_channels = " << c.in_channels << "\n";
    out << "num_classes = " << c.num_classes << "\n";
    out << "stage_channels = ";
    for (std::size_t i = 0; i < c.stage_channels.size(); ++i)
        out << (i ? "," : "") << c.stage_channels[i];
    out << "\n";
    char ratio[32];
    std::snprintf(ratio, sizeof ratio, "%.17g", c.transformer.mlp_ratio);
    out << "transformer.embed_dim = " << c.transformer.embed_dim << "\n";
    out << "transformer.num_heads = " << c.transformer.num_heads << "\n";
    out << "transformer.head_dim = " << c.transformer.head_dim << "\n";
    out << "transformer.mlp_ratio = " << ratio << "\n";
    out << "gate_variant = " << variant_name(c.gate_variant) << "\n";
    out << "gate_mode = " << gate_mode_name(c.gate_mode) << "\n";
    out << "gate_token_budget = " << c.gate_token_budget << "\n";
    out << "use_dag = " << (c.ablation.use_dag ? 1 : 0) << "\n";
    out << "use_transformer = " << (c.ablation.use_transformer ? 1 : 0) << "\n";
    out << "seed = " << c.seed << "\n";
    return out.str();
}

ModelConfig decode_model_config(const std::string& text) {
    ModelConfig c;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) raise(ErrorKind::InvalidArgument, "config line without '=': " + line);
        const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        try {
            if (key == "input_h")
                c.input_h = std::stoi(val);
            else if (key == "input_w")
                c.input_w = std::stoi(val);
            else if (key == "in_channels")
                c.in_channels = std::stoi(val);
            else if (key == "num_classes")
                c.num_classes = std::stoi(val);
            else if (key == "stage_channels") {
                c.stage_channels.clear();
                std::istringstream list(val);
                std::string item;
                while (std::getline(list, item, ',')) c.stage_channels.push_back(std::stoi(trim(item)));
            } else if (key == "transformer.embed_dim")
                c.transformer.embed_dim = std::stoi(val);
            else if (key == "transformer.num_heads")
                c.transformer.num_heads = std::stoi(val);
            else if (key == "transformer.head_dim")
                c.transformer.head_dim = std::stoi(val);
            else if (key == "transformer.mlp_ratio")
                c.transformer.mlp_ratio = std::stod(val);
            else if (key == "gate_variant")
                c.gate_variant = parse_variant(val);
            else if (key == "gate_mode")
                c.gate_mode = parse_gate_mode(val);
            else if (key == "gate_token_budget")
                c.gate_token_budget = std::stoi(val);
            else if (key == "use_dag")
                c.ablation.use_dag = std::stoi(val) != 0;
            else if (key == "use_transformer")
                c.ablation.use_transformer = std::stoi(val) != 0;
            else if (key == "seed")
                c.seed = std::stoull(val);
            else
                raise(ErrorKind::InvalidArgument, "unknown model config key '" + key + "'");
        } catch (const Error&) {
            throw;
        } catch (const std::exception&) {
            raise(ErrorKind::InvalidArgument, "bad value for '" + key + "': " + val);
        }
    }
    return c;
}

}  // namespace cysto
