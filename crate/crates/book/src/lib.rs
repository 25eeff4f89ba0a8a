//! Each chapter of the guide is compiled as a doc-test so the book cannot
//! drift from the library.

macro_rules! chapters {
    ($($name:ident => $file:literal),* $(,)?) => {
        $(
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            pub mod $name {}
        )*
    };
}

chapters! {
    introduction => "introduction.md",
    graphs => "graphs.md",
    vertex_probabilities => "vertex_probabilities.md",
    fixation => "fixation.md",
    expected_mutants => "expected_mutants.md",
    advantageous_bounds => "advantageous_bounds.md",
    mean_time => "mean_time.md",
    monte_carlo => "monte_carlo.md",
    oracle => "oracle.md",
    cli => "cli.md",
}
