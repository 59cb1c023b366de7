use selfik::checkpoint;
use selfik::datagen::read_csv;
use selfik::emssl::batch_infer;
use selfik::kinematics::{distance, norm, KinematicChain};

#[test]
fn probe() {
    let chain = KinematicChain::default6(std::f64::consts::FRAC_PI_2);
    let (mlp, norms) = checkpoint::load(std::path::Path::new("/tmp/v6.d/checkpoint.json")).unwrap();
    let test = read_csv(std::path::Path::new("/tmp/v6.d/test.csv")).unwrap();
    let goals = test.p.rows_copy(0, 2000);
    let q = batch_infer(&mlp, &norms, &goals, 512).unwrap();

    // bin error by goal radius
    let mut bins: Vec<(f64, f64, usize)> = vec![(0.0, 0.0, 0); 6]; // (sum_err, sum_r, n)
    for i in 0..goals.rows() {
        let g = [goals.row(i)[0], goals.row(i)[1], goals.row(i)[2]];
        let a = chain.fk(q.row(i));
        let err = distance(a, g);
        let r = norm(g);
        let b = ((r / 120.0) * 6.0).min(5.0) as usize;
        bins[b].0 += err;
        bins[b].1 += r;
        bins[b].2 += 1;
    }
    for (b, (se, sr, n)) in bins.iter().enumerate() {
        if *n > 0 {
            println!("radius bin {b} (mean r {:5.1} cm, n {:4}): mean err {:6.2} cm",
                     sr / *n as f64, n, se / *n as f64);
        }
    }
    // octant analysis: x sign
    let mut neg = (0.0, 0usize);
    let mut pos = (0.0, 0usize);
    for i in 0..goals.rows() {
        let g = [goals.row(i)[0], goals.row(i)[1], goals.row(i)[2]];
        let a = chain.fk(q.row(i));
        let err = distance(a, g);
        if g[0] < 0.0 { neg.0 += err; neg.1 += 1 } else { pos.0 += err; pos.1 += 1 }
    }
    println!("x<0 goals: n {} mean err {:.2} | x>=0 goals: n {} mean err {:.2}",
             neg.1, neg.0 / neg.1 as f64, pos.1, pos.0 / pos.1 as f64);
    // z analysis
    let mut lo = (0.0, 0usize);
    let mut hi = (0.0, 0usize);
    for i in 0..goals.rows() {
        let g = [goals.row(i)[0], goals.row(i)[1], goals.row(i)[2]];
        let a = chain.fk(q.row(i));
        let err = distance(a, g);
        if g[2] < 0.0 { lo.0 += err; lo.1 += 1 } else { hi.0 += err; hi.1 += 1 }
    }
    println!("z<0 goals: n {} mean err {:.2} | z>=0 goals: n {} mean err {:.2}",
             lo.1, lo.0 / lo.1 as f64, hi.1, hi.0 / hi.1 as f64);
}
