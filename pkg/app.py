"""
LPC Augment Inspector - Streamlit App
Warp a vowel (synthetic or uploaded) and look at what happened to its formants
"""

import os
import tempfile

import numpy as np
import pandas as pd
import streamlit as st

try:
    from augment_pipeline import DEFAULT_PRESET, WARP_PRESETS, AugmentConfig, UtteranceSeed, augment_utterance
    from errors import LpcAugmentError
    from formant_analysis import analyze_formant_shift, synthetic_vowel
    from pole_warp import WarpPlan
    from signal_core import AudioBuffer, load_wav
except ImportError as e:
    st.error(f"Import error: {e}")
    st.info("Run the app from the repository root: streamlit run app.py")
    st.stop()

# Page config
st.set_page_config(
    page_title="LPC Augment Inspector",
    page_icon="🎙️",
    layout="wide",
    initial_sidebar_state="expanded"
)

st.markdown("""
<style>
    .main-header {
        font-size: 2.2rem;
        font-weight: bold;
        color: #1f77b4;
        text-align: center;
        margin-bottom: 1.5rem;
    }
</style>
""", unsafe_allow_html=True)


@st.cache_data
def cached_vowel(f1: float, f2: float, f3: float, sample_rate: int, seed: int) -> np.ndarray:
    return synthetic_vowel(sample_rate=sample_rate, formants_hz=(f1, f2, f3), seed=seed).samples


def load_upload(uploaded) -> AudioBuffer:
    """Uploaded bytes go through load_wav so they get the same validation as CLI input"""
    with tempfile.NamedTemporaryFile(suffix='.wav', delete=False) as tmp:
        tmp.write(uploaded.getvalue())
        tmp_path = tmp.name
    try:
        return load_wav(tmp_path)
    finally:
        os.remove(tmp_path)


def parse_factors(text: str):
    values = [float(v) for v in text.replace(',', ' ').split()]
    if not values:
        raise ValueError("enter at least one factor")
    return values


def main():
    st.markdown('<div class="main-header">🎙️ LPC Augment Inspector</div>', unsafe_allow_html=True)
    st.markdown("##### Formant perturbation by LPC pole rotation")

    # Sidebar
    with st.sidebar:
        st.header("🔊 Source")
        source = st.radio("Audio source:", ["Synthetic vowel", "Upload WAV"])

        if source == "Synthetic vowel":
            f1 = st.number_input("F1 (Hz)", 200.0, 1200.0, 500.0, step=50.0)
            f2 = st.number_input("F2 (Hz)", 600.0, 3000.0, 1500.0, step=50.0)
            f3 = st.number_input("F3 (Hz)", 1500.0, 3500.0, 2500.0, step=50.0)
            uploaded = None
        else:
            uploaded = st.file_uploader("WAV file", type=['wav'])

        st.divider()
        st.header("🎛️ Warping")
        mode = st.radio("Factors:", ["Seeded draw", "Forced factors"])
        if mode == "Seeded draw":
            preset = st.selectbox("Warp range preset:", sorted(WARP_PRESETS),
                                  index=sorted(WARP_PRESETS).index(DEFAULT_PRESET),
                                  format_func=lambda p: f"{p} {list(WARP_PRESETS[p])}")
            seed = st.number_input("Global seed", min_value=0, value=0, step=1)
            factors_text = None
        else:
            preset = DEFAULT_PRESET
            seed = 0
            factors_text = st.text_input("Factors (cycled over pole pairs)", "0.9 0.9 1.1")

        energy_match = st.checkbox("Match frame energy", value=False)

    # Load audio
    try:
        if source == "Synthetic vowel":
            buffer = AudioBuffer(cached_vowel(f1, f2, f3, 16000, 0), 16000)
            utterance_id = 'synthetic_vowel'
        elif uploaded is not None:
            buffer = load_upload(uploaded)
            utterance_id = os.path.splitext(uploaded.name)[0]
        else:
            st.info("👈 Upload a WAV file to begin")
            return
    except LpcAugmentError as e:
        st.error(f"❌ Could not load audio: {e}")
        return

    cfg = AugmentConfig(energy_match=energy_match).with_preset(preset)
    order = cfg.order_for(buffer.sample_rate)

    try:
        if factors_text is not None:
            plan = WarpPlan.forced(parse_factors(factors_text), order // 2)
        else:
            plan = None
        seed_id = UtteranceSeed(int(seed), utterance_id, 1)

        with st.spinner("Warping..."):
            analysis = analyze_formant_shift(buffer, cfg, plan=plan, seed=seed_id)
            result = augment_utterance(buffer, cfg, plan=analysis['plan'])
    except ValueError as e:
        st.error(f"❌ Invalid factors: {e}")
        return
    except LpcAugmentError as e:
        st.error(f"❌ Analysis failed: {e}")
        return

    display_dashboard(buffer, result, analysis)


def display_dashboard(buffer: AudioBuffer, result, analysis: dict):
    # Summary row
    col1, col2, col3, col4 = st.columns(4)
    with col1:
        st.metric("Sample rate", f"{buffer.sample_rate} Hz")
    with col2:
        st.metric("LPC order", analysis['order'])
    with col3:
        st.metric("Frames passed through", f"{result.passthrough_frames}/{result.total_frames}")
    with col4:
        st.metric("Analysis frame", analysis['frame_index'])

    if result.peak_limited:
        st.warning("⚠️ Output was peak limited")
    if result.too_short:
        st.warning("⚠️ Audio is shorter than one window and was returned unmodified")

    st.divider()

    # Envelope chart
    st.subheader("📈 LPC Envelope")
    st.plotly_chart(analysis['chart'], width='stretch')

    col1, col2 = st.columns(2)
    with col1:
        st.subheader("🎯 Formant Peaks")
        peaks = analysis['peaks'].copy()
        peaks['shift_pct'] = 100.0 * peaks['shift_hz'] / peaks['freq_before_hz']
        st.dataframe(peaks.round(1), width='stretch', hide_index=True)
    with col2:
        st.subheader("🌀 Pole Pairs")
        st.dataframe(analysis['poles'].round(4), width='stretch', hide_index=True)

    # Warp factors
    with st.expander("Warp factors for this utterance"):
        factors = pd.DataFrame({
            'pair_index': np.arange(len(analysis['plan'].factors)),
            'factor': analysis['plan'].factors,
        })
        st.dataframe(factors, width='stretch', hide_index=True)

    # Audio
    st.subheader("🔈 Listen")
    col1, col2 = st.columns(2)
    with col1:
        st.caption("Original")
        st.audio(buffer.samples, sample_rate=buffer.sample_rate)
    with col2:
        st.caption("LPC Augment")
        st.audio(result.buffer.samples, sample_rate=result.buffer.sample_rate)


# Run app
if __name__ == "__main__":
    main()
