# Leading-order phase (3/2 w int_0^t sqrt(|q|))^(2/3), with the sign of t,
# for q = t + t^3, w = 2^8 at the 16 extremal nodes of [-1/4, 1/4]. Used by
# tests/window.rs.
import mpmath as mp

mp.mp.dps = 40
w, a0, k = mp.mpf(256), mp.mpf(1) / 4, 16

def gamma0(t):
    i = mp.quad(lambda s: mp.sqrt(abs(s + s**3)), [0, t])
    return mp.sign(t) * (mp.mpf(3) / 2 * w * abs(i)) ** (mp.mpf(2) / 3)

for j in range(1, k + 1):
    t = a0 * mp.cos(mp.pi * (k - j) / (k - 1))
    print("    %s," % mp.nstr(gamma0(t), 20, min_fixed=1, max_fixed=0))
