#include "mcp/units.hpp"

#include <algorithm>
#include <cmath>

namespace mcp {

SoilStepResult soil_step(const SoilGateParams& p, double x, const SoilInputs& in,
                         const SoilOptions& options, SoilStepTrace* trace) {
    SoilGates g = soil_gates(p, x, in.pet_std);

    bool capped = false;
    if (options.pet_constrained) {
        const double limited = pet_constrained_loss_gate(g.g_L, in.pet, x);
        if (limited < g.g_L) {
            capped = true;
            g.g_R = std::min(1.0, g.g_R + (g.g_L - limited));
            g.g_L = limited;
        }
    }

    SoilStepResult r;
    r.outflow = g.g_O * x;
    r.loss = capped ? in.pet : g.g_L * x;

    double kappa_mr = 0.0, rate_mr = 0.0, tanh_mr = 0.0;
    if (p.mr) {
        kappa_mr = sigmoid(p.mr->kappa_raw);
        rate_mr = std::exp(p.mr->a_raw);
        tanh_mr = std::tanh(rate_mr * (x / kStateReference - p.mr->c_tilde));
        r.mr_flux = -kappa_mr * tanh_mr * options.flux_ref;
    }

    const double retained = g.g_R * x + in.u;
    double x_next = retained + r.mr_flux;
    bool clamped = false;
    if (x_next < 0.0) {
        clamped = true;
        x_next = 0.0;
        r.mr_flux = -retained;
    }
    r.x_next = x_next;

    if (trace) {
        trace->gates = g;
        trace->x = x;
        trace->loss_capped = capped;
        trace->clamped = clamped;
        trace->mr_kappa = kappa_mr;
        trace->mr_rate = rate_mr;
        trace->mr_tanh = tanh_mr;
    }
    return r;
}

SoilInputAdjoint soil_step_backward(const SoilGateParams& p, const SoilStepTrace& tr,
                                    const SoilInputs& in, const SoilOptions& options,
                                    const SoilStepAdjoint& adj, SoilGateParams& grad) {
    const SoilGates& g = tr.gates;
    const double x = tr.x;
    const double xs = x / kStateReference;

    SoilInputAdjoint out;
    double outflow_bar = adj.outflow;
    double loss_bar = adj.loss;
    double mr_bar = 0.0;
    if (!tr.clamped) {
        // X' = X - O - L + U + MR
        out.x = adj.x_next;
        out.u = adj.x_next;
        outflow_bar -= adj.x_next;
        loss_bar -= adj.x_next;
        mr_bar = adj.x_next;
    }

    const double gO_bar = outflow_bar * x;
    out.x += outflow_bar * g.g_O;

    double gL_bar = 0.0;
    if (!tr.loss_capped) {
        gL_bar = loss_bar * x;
        out.x += loss_bar * g.g_L;
    }

    const double kO_bar = gO_bar * g.sig_O;
    const double sO_bar = gO_bar * g.kappa_O * g.sig_O * (1.0 - g.sig_O);
    grad.a_O += sO_bar;
    grad.b_O += sO_bar * xs;
    out.x += sO_bar * p.b_O / kStateReference;

    const double kL_bar = gL_bar * g.sig_L;
    const double sL_bar = gL_bar * g.kappa_L * g.sig_L * (1.0 - g.sig_L);
    grad.a_L += sL_bar;
    grad.b_L += sL_bar * in.pet_std;
    if (p.b_L_star) {
        *grad.b_L_star += sL_bar * xs;
        out.x += sL_bar * *p.b_L_star / kStateReference;
    }

    const double dot = kO_bar * g.kappa_O + kL_bar * g.kappa_L;
    grad.c_O += g.kappa_O * (kO_bar - dot);
    grad.c_L += g.kappa_L * (kL_bar - dot);
    grad.c_R += g.kappa_R * (0.0 - dot);

    if (p.mr && mr_bar != 0.0) {
        // MR = -F * kappa * tanh(rate * (xs - c))
        const double f_bar = -options.flux_ref * mr_bar;
        const double kappa_bar = f_bar * tr.mr_tanh;
        const double z_bar = f_bar * tr.mr_kappa * (1.0 - tr.mr_tanh * tr.mr_tanh);
        grad.mr->kappa_raw += kappa_bar * tr.mr_kappa * (1.0 - tr.mr_kappa);
        grad.mr->a_raw += z_bar * (xs - p.mr->c_tilde) * tr.mr_rate;
        grad.mr->c_tilde -= z_bar * tr.mr_rate;
        out.x += z_bar * tr.mr_rate / kStateReference;
    }
    return out;
}

SnowStepResult snow_step(const SnowGateParams& p, double swe, double u, const SnowContext& context,
                         SnowStepTrace* trace) {
    const SnowGates g = snow_gates(p, swe, context);
    SnowStepResult r;
    r.snowfall = g.g_RS * u;
    r.rainfall = u - r.snowfall;
    r.melt = g.g_M * swe;
    r.loss = g.g_SL * swe;
    r.swe_next = g.g_SR * swe + r.snowfall;
    if (trace) {
        trace->gates = g;
        trace->swe = swe;
        trace->u = u;
    }
    return r;
}

double snow_step_backward(const SnowGateParams& p, const SnowStepTrace& tr, double u,
                          const SnowContext& c, const SnowStepAdjoint& adj, SnowGateParams& grad) {
    const SnowGates& g = tr.gates;
    const double s = tr.swe;
    const double ss = s / kStateReference;

    // S' = S - melt - loss + U_S;  U_R = U - U_S
    double swe_bar = adj.swe_next;
    const double melt_bar = adj.melt - adj.swe_next;
    const double loss_bar = adj.loss - adj.swe_next;
    const double snowfall_bar = adj.swe_next - adj.rainfall;

    const double rs_bar = snowfall_bar * u * g.g_RS * (1.0 - g.g_RS);

    const double gM_bar = melt_bar * s;
    const double gSL_bar = loss_bar * s;
    swe_bar += melt_bar * g.g_M + loss_bar * g.g_SL;

    const double kM_bar = gM_bar * g.sig_M;
    const double m_bar = gM_bar * g.kappa_M * g.sig_M * (1.0 - g.sig_M);
    const double kSL_bar = gSL_bar * g.sig_SL;
    const double sl_bar = gSL_bar * g.kappa_SL * g.sig_SL * (1.0 - g.sig_SL);

    grad.a_RS += rs_bar;
    grad.b_RS += rs_bar * c.tmean;
    grad.a_M += m_bar;
    grad.b_M += m_bar * c.tmean;
    grad.bstar_M += m_bar * ss;
    grad.a_SL += sl_bar;
    grad.b_SL += sl_bar * c.tmean;
    grad.bstar_SL += sl_bar * ss;
    swe_bar += (m_bar * p.bstar_M + sl_bar * p.bstar_SL) / kStateReference;

    if (p.generic) {
        grad.generic->b_RS_vpd += rs_bar * *c.vpd;
        grad.generic->b_SL_vpd += sl_bar * *c.vpd;
        grad.generic->b_M_srad += m_bar * *c.srad;
    }
    if (p.complex) {
        grad.complex->b_RS_tmin += rs_bar * *c.tmin;
        grad.complex->b_RS_tmax += rs_bar * *c.tmax;
        grad.complex->b_M_tmin += m_bar * *c.tmin;
        grad.complex->b_M_tmax += m_bar * *c.tmax;
        grad.complex->b_SL_tmin += sl_bar * *c.tmin;
        grad.complex->b_SL_tmax += sl_bar * *c.tmax;
    }

    const double dot = kM_bar * g.kappa_M + kSL_bar * g.kappa_SL;
    grad.c_M += g.kappa_M * (kM_bar - dot);
    grad.c_SL += g.kappa_SL * (kSL_bar - dot);
    grad.c_SR += g.kappa_SR * (0.0 - dot);
    return swe_bar;
}

}  // namespace mcp
