//! Mittag-Leffler values checked against tables produced once with mpmath
//! (60 digits for e^{x^2} erfc(x); the power series summed at 300 and 400
//! digits and required to agree for E_{a,b}), then frozen here.

use fracback_core::mlf::{ml_eval, MlfParams};

/// `(x, e^{x^2} erfc(x))`, which equals `E_{1/2,1}(-x)`.
const HALF: &[(f64, f64)] = &[
    (0.0, 1.0),
    (0.05, 0.945990043554961478),
    (0.1, 0.896456979969126637),
    (0.25, 0.770346547730996744),
    (0.5, 0.615690344192925875),
    (0.75, 0.506937650293144806),
    (1.0, 0.427583576155807004),
    (1.5, 0.321585416454317502),
    (2.0, 0.255395676310505744),
    (2.5, 0.210806364061143581),
    (3.0, 0.17900115118138995),
    (3.5, 0.155293655608894297),
    (4.0, 0.13699945762506139),
    (4.5, 0.122484804273841418),
    (5.0, 0.110704637733068626),
    (6.0, 0.0927765678005383544),
    (7.0, 0.0798000543291529335),
    (8.0, 0.0699851662008809277),
    (10.0, 0.0561409927438225859),
    (12.0, 0.0468542210148937626),
    (15.0, 0.0375296063885057657),
    (20.0, 0.0281743487410513193),
    (25.0, 0.0225495724326413589),
    (30.0, 0.0187958888614167515),
    (35.0, 0.0161131309568159787),
    (40.0, 0.0141003359833778136),
    (45.0, 0.0125344529008944671),
    (50.0, 0.0112815362653237725),
];

/// `(alpha, beta, x, E_{alpha,beta}(-x))`.
const TABLE: &[(f64, f64, f64, f64)] = &[
    (0.3, 1.0, 0.5, 0.632649005943599022),
    (0.3, 1.0, 2.0, 0.290232226167875355),
    (0.3, 1.0, 5.0, 0.137080869020270639),
    (0.3, 0.3, 0.5, 0.143756500147221268),
    (0.3, 0.3, 2.0, 0.0320623992188474949),
    (0.3, 0.3, 5.0, 0.00727510080315491165),
    (0.3, 1.5, 0.5, 0.758913699330259902),
    (0.3, 1.5, 2.0, 0.375667504772125189),
    (0.3, 1.5, 5.0, 0.185242578911871281),
    (0.3, 2.3, 0.5, 0.606472044805402117),
    (0.3, 2.3, 2.0, 0.319811678222976813),
    (0.3, 2.3, 5.0, 0.163554433505609957),
    (0.5, 1.0, 0.5, 0.615690344192925875),
    (0.5, 1.0, 2.0, 0.255395676310505744),
    (0.5, 1.0, 5.0, 0.110704637733068626),
    (0.5, 1.0, 10.0, 0.0561409927438225859),
    (0.5, 1.0, 20.0, 0.0281743487410513193),
    (0.5, 0.5, 0.5, 0.25634441145129335),
    (0.5, 0.5, 2.0, 0.0533982309267447992),
    (0.5, 0.5, 5.0, 0.0106663948824131551),
    (0.5, 0.5, 10.0, 0.00277965610953042837),
    (0.5, 0.5, 20.0, 0.000702608726729900575),
    (0.5, 1.5, 0.5, 0.76861931161414825),
    (0.5, 1.5, 2.0, 0.372302161844747128),
    (0.5, 1.5, 5.0, 0.177859072453386275),
    (0.5, 1.5, 10.0, 0.0943859007256177414),
    (0.5, 1.5, 20.0, 0.048591282562947434),
    (0.5, 2.3, 0.5, 0.631044099380143063),
    (0.5, 2.3, 2.0, 0.343151112907924527),
    (0.5, 2.3, 5.0, 0.176462727563126153),
    (0.5, 2.3, 10.0, 0.0970487444791286616),
    (0.5, 2.3, 20.0, 0.0510031854701549422),
    (0.7, 1.0, 0.5, 0.605147592059564273),
    (0.7, 1.0, 2.0, 0.213786727015297275),
    (0.7, 1.0, 5.0, 0.07756935776476981),
    (0.7, 1.0, 10.0, 0.0361732655423091581),
    (0.7, 1.0, 20.0, 0.01739569829160398),
    (0.7, 1.0, 40.0, 0.00852617023091074438),
    (0.7, 0.7, 0.5, 0.386610800822527103),
    (0.7, 0.7, 2.0, 0.077358224338521222),
    (0.7, 0.7, 5.0, 0.012201124167156127),
    (0.7, 0.7, 10.0, 0.00272470249310229972),
    (0.7, 0.7, 20.0, 0.000632997246009697835),
    (0.7, 0.7, 40.0, 0.000152194921125852784),
    (0.7, 1.5, 0.5, 0.783700801790340871),
    (0.7, 1.5, 2.0, 0.367222458800568331),
    (0.7, 1.5, 5.0, 0.165037304351801265),
    (0.7, 1.5, 10.0, 0.0845434077062984738),
    (0.7, 1.5, 20.0, 0.0426483963308644782),
    (0.7, 1.5, 40.0, 0.0214033858590932355),
    (0.7, 2.3, 0.5, 0.656640436193509872),
    (0.7, 2.3, 2.0, 0.368235039345696398),
    (0.7, 2.3, 5.0, 0.188634774511942552),
    (0.7, 2.3, 10.0, 0.102807491506873954),
    (0.7, 2.3, 20.0, 0.0536483527499730733),
    (0.7, 2.3, 40.0, 0.0273980278203130483),
    (0.9, 1.0, 0.5, 0.603405498695860968),
    (0.9, 1.0, 2.0, 0.163528300016930043),
    (0.9, 1.0, 5.0, 0.0344313248040984183),
    (0.9, 1.0, 10.0, 0.0128206060511020999),
    (0.9, 1.0, 20.0, 0.00574950781610911258),
    (0.9, 1.0, 40.0, 0.00274344969779209949),
    (0.9, 0.9, 0.5, 0.531902351568437342),
    (0.9, 0.9, 2.0, 0.110598024293208485),
    (0.9, 0.9, 5.0, 0.0102127904529921332),
    (0.9, 0.9, 10.0, 0.0014346523622941286),
    (0.9, 0.9, 20.0, 0.000284025957411926388),
    (0.9, 0.9, 40.0, 0.0000644911832058425058),
    (0.9, 1.5, 0.5, 0.804907716033169525),
    (0.9, 1.5, 2.0, 0.362203465882812179),
    (0.9, 1.5, 5.0, 0.144740480440252131),
    (0.9, 1.5, 10.0, 0.0696832858350141264),
    (0.9, 1.5, 20.0, 0.0341801047314238168),
    (0.9, 1.5, 40.0, 0.016935375997785257),
    (0.9, 2.3, 0.5, 0.682883763651734628),
    (0.9, 2.3, 2.0, 0.396776648014082221),
    (0.9, 2.3, 5.0, 0.200190665201147269),
    (0.9, 2.3, 10.0, 0.106760675217392916),
    (0.9, 2.3, 20.0, 0.0549069463676144203),
    (0.9, 2.3, 40.0, 0.027819575100254717),
];

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn half_order_matches_scaled_erfc() {
    let p = MlfParams::standard(0.5).unwrap();
    for &(x, want) in HALF {
        let got = ml_eval(p, x).unwrap();
        assert!(rel(got, want) < 1e-10, "x={x}: {got:e} vs {want:e}");
    }
}

#[test]
fn two_parameter_table() {
    let mut worst: f64 = 0.0;
    for &(a, b, x, want) in TABLE {
        let got = ml_eval(MlfParams::new(a, b).unwrap(), x).unwrap();
        let r = rel(got, want);
        worst = worst.max(r);
        assert!(r < 1e-9, "E_{{{a},{b}}}(-{x}) = {got:e}, table {want:e}, rel {r:e}");
    }
    assert!(worst < 1e-9);
}
