use super::AudioClip;

/// Zero crossings of the sinc kept on each side of the kernel centre.
pub const SINC_HALF_WIDTH: usize = 64;
pub const KAISER_BETA: f64 = 8.6;
/// Above this many distinct fractional phases, taps are computed per output.
const MAX_PHASE_TABLE: u64 = 4096;

fn bessel_i0(x: f64) -> f64 {
    // power series; converges quickly for the β values used here
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let r = half / k as f64;
        term *= r * r;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

struct Kernel {
    /// Cutoff in cycles per input sample (≤ 0.5).
    cutoff: f64,
    /// Half-width of the window in input samples.
    width: f64,
    i0_beta: f64,
}

impl Kernel {
    fn new(source: u32, target: u32) -> Self {
        let nyquist = f64::from(source.min(target)) / 2.0;
        let cutoff = nyquist / f64::from(source);
        Self {
            cutoff,
            width: SINC_HALF_WIDTH as f64 / (2.0 * cutoff),
            i0_beta: bessel_i0(KAISER_BETA),
        }
    }

    /// Tap weight at offset `x` input samples from the kernel centre.
    fn weight(&self, x: f64) -> f64 {
        let u = x / self.width;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let arg = 2.0 * self.cutoff * x;
        let sinc = if arg == 0.0 {
            1.0
        } else {
            let px = std::f64::consts::PI * arg;
            px.sin() / px
        };
        let window = bessel_i0(KAISER_BETA * (1.0 - u * u).sqrt()) / self.i0_beta;
        2.0 * self.cutoff * sinc * window
    }

    /// Tap range `[lo, hi]` relative to floor(t) that can be non-zero.
    fn reach(&self) -> i64 {
        self.width.ceil() as i64 + 1
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Kaiser-windowed sinc resampling; samples outside the clip count as zero.
/// Output length is `round(N·target/source)`. Equal rates return the input
/// unchanged.
pub fn resample(clip: &AudioClip, target_rate: u32) -> AudioClip {
    let source_rate = clip.sample_rate;
    if source_rate == target_rate {
        return clip.clone();
    }
    let n = clip.samples.len() as u64;
    let (src, dst) = (u64::from(source_rate), u64::from(target_rate));
    let out_len = ((u128::from(n) * u128::from(dst) + u128::from(src / 2)) / u128::from(src)) as usize;

    let kernel = Kernel::new(source_rate, target_rate);
    let reach = kernel.reach();
    let g = gcd(src, dst);
    // t_m = m·step_num/phases input samples
    let (step_num, phases) = (src / g, dst / g);
    let taps_per_phase = (2 * reach + 1) as usize;

    let table: Option<Vec<f64>> = (phases <= MAX_PHASE_TABLE).then(|| {
        let mut t = Vec::with_capacity(phases as usize * taps_per_phase);
        for p in 0..phases {
            let frac = p as f64 / phases as f64;
            for j in -reach..=reach {
                t.push(kernel.weight(frac - j as f64));
            }
        }
        t
    });

    let input = &clip.samples;
    let mut out = Vec::with_capacity(out_len);
    let mut scratch = vec![0.0; taps_per_phase];
    for m in 0..out_len as u64 {
        let pos = u128::from(m) * u128::from(step_num);
        let base = (pos / u128::from(phases)) as i64;
        let phase = (pos % u128::from(phases)) as u64;
        let taps: &[f64] = match &table {
            Some(t) => &t[phase as usize * taps_per_phase..(phase as usize + 1) * taps_per_phase],
            None => {
                let frac = phase as f64 / phases as f64;
                for (s, j) in scratch.iter_mut().zip(-reach..=reach) {
                    *s = kernel.weight(frac - j as f64);
                }
                &scratch
            }
        };
        let mut acc = 0.0f64;
        for (w, j) in taps.iter().zip(-reach..=reach) {
            let k = base + j;
            if k >= 0 && (k as u64) < n {
                acc += w * f64::from(input[k as usize]);
            }
        }
        out.push(acc.clamp(-1.0, 1.0) as f32);
    }
    AudioClip::new(out, target_rate, clip.source.clone())
}
