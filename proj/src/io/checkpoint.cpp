#include "glint/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "glint/error.hpp"

namespace glint {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof v);
  }
  template <typename T>
  void put_array(const T* data, std::size_t n) {
    buf_.append(reinterpret_cast<const char*>(data), n * sizeof(T));
  }
  void put_string(const std::string& s) {
    put(std::uint32_t(s.size()));
    buf_.append(s);
  }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t size, std::string what) : p_(data), end_(data + size), what_(std::move(what)) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, p_, sizeof v);
    p_ += sizeof v;
    return v;
  }
  template <typename T>
  void get_array(T* out, std::size_t n) {
    if (n > std::size_t(end_ - p_) / sizeof(T)) fail();
    std::memcpy(out, p_, n * sizeof(T));
    p_ += n * sizeof(T);
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(p_, n);
    p_ += n;
    return s;
  }
  bool done() const { return p_ == end_; }
  std::size_t left() const { return std::size_t(end_ - p_); }
  const char* cursor() const { return p_; }
  void skip(std::size_t n) {
    need(n);
    p_ += n;
  }

 private:
  void need(std::size_t n) {
    if (n > std::size_t(end_ - p_)) fail();
  }
  [[noreturn]] void fail() { throw LoadError("checkpoint truncated in " + what_); }
  const char* p_;
  const char* end_;
  std::string what_;
};

void section(Writer& out, const char tag[4], Writer& body) {
  out.put_array(tag, 4);
  out.put(std::uint64_t(body.bytes().size()));
  out.bytes() += body.bytes();
}

void put_net_config(Writer& w, const NetworkConfig& n) {
  w.put(std::int32_t(n.width));
  w.put(std::int32_t(n.depth));
  w.put(std::int32_t(n.skip_layer));
}

NetworkConfig get_net_config(Reader& r) {
  NetworkConfig n;
  n.width = r.get<std::int32_t>();
  n.depth = r.get<std::int32_t>();
  n.skip_layer = r.get<std::int32_t>();
  return n;
}

void put_mlp(Writer& w, const Mlp<float>& net) {
  const MlpShape& s = net.shape();
  w.put(std::int32_t(s.input_dim));
  w.put(std::int32_t(s.width));
  w.put(std::int32_t(s.depth));
  w.put(std::int32_t(s.skip_layer));
  w.put(std::int32_t(s.heads.size()));
  for (int h : s.heads) w.put(std::int32_t(h));
  const auto p = net.parameters();
  w.put(std::uint64_t(p.size()));
  w.put_array(p.data(), p.size());
}

void get_mlp(Reader& r, Mlp<float>& net, const char* name) {
  MlpShape s;
  s.input_dim = r.get<std::int32_t>();
  s.width = r.get<std::int32_t>();
  s.depth = r.get<std::int32_t>();
  s.skip_layer = r.get<std::int32_t>();
  const int heads = r.get<std::int32_t>();
  if (heads < 0 || heads > 64) throw LoadError(std::string("corrupt shape header for ") + name);
  for (int i = 0; i < heads; ++i) s.heads.push_back(r.get<std::int32_t>());
  const auto count = r.get<std::uint64_t>();
  if (!(s == net.shape()))
    throw LoadError(std::string("shape header mismatch for ") + name + ": stored width " + std::to_string(s.width) +
                    " depth " + std::to_string(s.depth) + ", model width " + std::to_string(net.shape().width) +
                    " depth " + std::to_string(net.shape().depth));
  if (count != net.parameters().size()) throw LoadError(std::string("parameter count mismatch for ") + name);
  auto dst = net.mutable_parameters();
  r.get_array(dst.data(), dst.size());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Sections {
  std::vector<std::pair<std::string, std::pair<const char*, std::size_t>>> items;
  const std::pair<const char*, std::size_t>* find(const std::string& tag) const {
    for (const auto& it : items)
      if (it.first == tag) return &it.second;
    return nullptr;
  }
};

Sections split_sections(const std::string& bytes) {
  Reader r(bytes.data(), bytes.size(), "header");
  char magic[4];
  r.get_array(magic, 4);
  if (std::memcmp(magic, "SPMO", 4) != 0) throw LoadError("not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw LoadError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  Sections s;
  for (;;) {
    char tag[4];
    r.get_array(tag, 4);
    const auto len = r.get<std::uint64_t>();
    const std::string name(tag, 4);
    if (len > r.left()) throw LoadError("checkpoint truncated in section " + name);
    if (name == "END!") break;
    s.items.push_back({name, {r.cursor(), std::size_t(len)}});
    r.skip(len);
  }
  if (!r.done()) throw LoadError("trailing bytes after checkpoint end marker");
  return s;
}

Reader section_reader(const Sections& s, const std::string& tag) {
  const auto* p = s.find(tag);
  if (!p) throw LoadError("checkpoint lacks section " + tag);
  return Reader(p->first, p->second, "section " + tag);
}

ModelConfig read_config(const Sections& s) {
  Reader r = section_reader(s, "CONF");
  ModelConfig c;
  c.encoding.position_frequencies = r.get<std::int32_t>();
  c.encoding.time_frequencies = r.get<std::int32_t>();
  c.encoding.direction_frequencies = r.get<std::int32_t>();
  c.gaussian_net = get_net_config(r);
  c.reflection_net = get_net_config(r);
  c.env_resolution = r.get<std::int32_t>();
  c.env_mips = r.get<std::int32_t>();
  c.env_samples = r.get<std::int32_t>();
  c.init_opacity = r.get<double>();
  c.init_roughness = r.get<double>();
  return c;
}

void read_body(const Sections& s, Model& m, Adam* opt, int* iteration) {
  {
    Reader r = section_reader(s, "NETG");
    get_mlp(r, m.gaussian_net, "the Gaussian network");
  }
  {
    Reader r = section_reader(s, "NETR");
    get_mlp(r, m.reflection_net, "the reflection network");
  }
  {
    Reader r = section_reader(s, "ENVM");
    const int res = r.get<std::int32_t>(), mips = r.get<std::int32_t>();
    if (res != m.env.base_resolution() || mips != m.env.mip_levels())
      throw LoadError("shape header mismatch for the cube map: stored " + std::to_string(res) + " with " +
                      std::to_string(mips) + " mips");
    auto& raw = m.env.mutable_raw();
    r.get_array(raw.data(), raw.size());
  }
  {
    Reader r = section_reader(s, "GAUS");
    const auto n = r.get<std::uint64_t>();
    if (n > (std::uint64_t(1) << 40)) throw LoadError("corrupt Gaussian count");
    m.gaussians.resize(std::size_t(n));
    m.gaussians.for_each_attribute([&](std::string_view name, int width, std::vector<double>& a) {
      if (r.get_string() != name || r.get<std::int32_t>() != width)
        throw LoadError("Gaussian attribute layout mismatch at " + std::string(name));
      r.get_array(a.data(), a.size());
    });
  }
  if (iteration) {
    *iteration = 0;
    if (s.find("SCHD")) *iteration = section_reader(s, "SCHD").get<std::int32_t>();
  }
  if (opt && s.find("OPTM")) {
    Reader r = section_reader(s, "OPTM");
    AdamConfig cfg;
    cfg.beta1 = r.get<double>();
    cfg.beta2 = r.get<double>();
    cfg.epsilon = r.get<double>();
    *opt = Adam(cfg);
    const auto groups = r.get<std::uint32_t>();
    for (std::uint32_t g = 0; g < groups; ++g) {
      const std::string name = r.get_string();
      AdamMoments mo;
      mo.step = r.get<std::uint64_t>();
      const auto n = r.get<std::uint64_t>();
      if (n > r.left() / 16) throw LoadError("checkpoint truncated in section OPTM");
      mo.m.resize(n);
      mo.v.resize(n);
      r.get_array(mo.m.data(), n);
      r.get_array(mo.v.data(), n);
      opt->mutable_groups()[name] = std::move(mo);
    }
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& m, const Adam* opt, int iteration) {
  Writer out;
  out.put_array("SPMO", 4);
  out.put(kCheckpointVersion);
  {
    Writer b;
    const ModelConfig& c = m.config;
    b.put(std::int32_t(c.encoding.position_frequencies));
    b.put(std::int32_t(c.encoding.time_frequencies));
    b.put(std::int32_t(c.encoding.direction_frequencies));
    put_net_config(b, c.gaussian_net);
    put_net_config(b, c.reflection_net);
    b.put(std::int32_t(c.env_resolution));
    b.put(std::int32_t(c.env_mips));
    b.put(std::int32_t(c.env_samples));
    b.put(c.init_opacity);
    b.put(c.init_roughness);
    section(out, "CONF", b);
  }
  {
    Writer b;
    b.put(std::uint64_t(m.gaussians.size()));
    m.gaussians.for_each_attribute([&](std::string_view name, int width, const std::vector<double>& a) {
      b.put_string(std::string(name));
      b.put(std::int32_t(width));
      b.put_array(a.data(), a.size());
    });
    section(out, "GAUS", b);
  }
  {
    Writer b;
    put_mlp(b, m.gaussian_net);
    section(out, "NETG", b);
  }
  {
    Writer b;
    put_mlp(b, m.reflection_net);
    section(out, "NETR", b);
  }
  {
    Writer b;
    b.put(std::int32_t(m.env.base_resolution()));
    b.put(std::int32_t(m.env.mip_levels()));
    b.put_array(m.env.raw().data(), m.env.raw().size());
    section(out, "ENVM", b);
  }
  if (opt) {
    Writer b;
    b.put(opt->config().beta1);
    b.put(opt->config().beta2);
    b.put(opt->config().epsilon);
    b.put(std::uint32_t(opt->groups().size()));
    for (const auto& [name, mo] : opt->groups()) {
      b.put_string(name);
      b.put(std::uint64_t(mo.step));
      b.put(std::uint64_t(mo.m.size()));
      b.put_array(mo.m.data(), mo.m.size());
      b.put_array(mo.v.data(), mo.v.size());
    }
    section(out, "OPTM", b);
  }
  {
    Writer b;
    b.put(std::int32_t(iteration));
    section(out, "SCHD", b);
  }
  Writer end;
  section(out, "END!", end);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw LoadError("cannot write checkpoint " + path.string());
  f.write(out.bytes().data(), std::streamsize(out.bytes().size()));
  if (!f) throw LoadError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const Sections s = split_sections(bytes);
  Checkpoint c;
  const ModelConfig cfg = read_config(s);
  std::mt19937_64 rng(0);
  try {
    c.model = Model(cfg, rng);
  } catch (const Error& e) {
    throw LoadError(std::string("checkpoint configuration is invalid: ") + e.what());
  }
  Adam opt;
  read_body(s, c.model, &opt, &c.iteration);
  if (s.find("OPTM")) c.optimizer = std::move(opt);
  return c;
}

void load_checkpoint_into(const std::filesystem::path& path, Model& model, Adam* optimizer, int* iteration) {
  const std::string bytes = read_file(path);
  const Sections s = split_sections(bytes);
  read_body(s, model, optimizer, iteration);
}

}  // namespace glint
