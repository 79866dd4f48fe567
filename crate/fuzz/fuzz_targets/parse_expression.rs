#![no_main]

use idepcag::Expression;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(e) = Expression::parse(src) else {
        return;
    };
    for (t, k) in [(0.0, 0.0), (-1.5, 3.0), (1e6, -7.0)] {
        let _ = e.eval(t, k);
    }
    // Printing must produce something the parser accepts again.
    let printed = e.to_string();
    let again = Expression::parse(&printed).expect("printed form parses");
    assert_eq!(again.root(), e.root(), "{printed}");
});
