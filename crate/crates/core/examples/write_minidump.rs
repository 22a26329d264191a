//! Regenerates the bundled miniature dumps under `data/minidump/`.

fn main() {
    for lang in wikimrc::synth::MINI_LANGUAGES {
        std::fs::write(format!("crates/core/data/minidump/{lang}.xml"), wikimrc::synth::mini_dump(lang)).unwrap();
    }
}
