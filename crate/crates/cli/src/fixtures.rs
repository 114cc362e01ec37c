//! The bundled model files, addressable as `case:<name>`.

pub const FIXTURES: &[(&str, &str)] = &[
    ("A", include_str!("../../../cases/A.model")),
    ("A-fixed-lapse", include_str!("../../../cases/A-fixed-lapse.model")),
    ("B", include_str!("../../../cases/B.model")),
    ("C", include_str!("../../../cases/C.model")),
    ("D", include_str!("../../../cases/D.model")),
];

pub fn fixture(name: &str) -> Option<&'static str> {
    FIXTURES.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
