/**
 * Three.js viewport. Renders exactly the payload sections: topology comes
 * from the layout endpoint, vertex data straight from the binary payload.
 */

import * as THREE from "three";
import { OrbitControls } from "three/examples/jsm/controls/OrbitControls.js";
import { LayoutDoc } from "./api";
import { GeometryFrame, KIND_JOINTS } from "./payload";

const GARMENT_COLORS = [0xb03a3a, 0x3a55b0, 0x3ab06e, 0xb0883a];

export class Viewport {
  private readonly renderer: THREE.WebGLRenderer;
  private readonly scene: THREE.Scene;
  private readonly camera: THREE.PerspectiveCamera;
  private readonly controls: OrbitControls;
  private readonly meshes = new Map<string, THREE.Mesh>();
  private skeletonLines: THREE.LineSegments | null = null;
  private jointParents: number[] = [];

  constructor(container: HTMLElement) {
    this.renderer = new THREE.WebGLRenderer({ antialias: true });
    this.renderer.setPixelRatio(window.devicePixelRatio);
    container.appendChild(this.renderer.domElement);
    this.scene = new THREE.Scene();
    this.scene.background = new THREE.Color(0x16181d);
    this.camera = new THREE.PerspectiveCamera(45, 1, 0.01, 100);
    this.camera.position.set(1.6, 1.6, 2.6);
    this.controls = new OrbitControls(this.camera, this.renderer.domElement);
    this.controls.target.set(0, 0.95, 0);
    this.scene.add(new THREE.HemisphereLight(0xf5f6fa, 0x2a2d33, 1.1));
    const sun = new THREE.DirectionalLight(0xffffff, 1.4);
    sun.position.set(2, 4, 3);
    this.scene.add(sun);
    this.scene.add(new THREE.GridHelper(4, 16, 0x3a3f4a, 0x262a31));
    const resize = () => {
      const w = container.clientWidth || 1;
      const h = container.clientHeight || 1;
      this.renderer.setSize(w, h);
      this.camera.aspect = w / h;
      this.camera.updateProjectionMatrix();
    };
    new ResizeObserver(resize).observe(container);
    resize();
  }

  /** Rebuild draw objects when the section set or topology changes. */
  setTopology(layout: LayoutDoc): void {
    const wanted = new Set<string>();
    let garmentIndex = 0;
    for (const section of layout.sections) {
      if (section.kind === "joints") {
        this.jointParents = section.parents ?? [];
        continue;
      }
      wanted.add(section.name);
      let mesh = this.meshes.get(section.name);
      const indices = (section.triangles ?? []).flat();
      if (!mesh) {
        const geometry = new THREE.BufferGeometry();
        const count = section.vertex_count ?? 0;
        geometry.setAttribute("position", new THREE.BufferAttribute(new Float32Array(count * 3), 3));
        geometry.setAttribute("normal", new THREE.BufferAttribute(new Float32Array(count * 3), 3));
        geometry.setIndex(indices);
        const color =
          section.kind === "body" ? 0xc8a78a : GARMENT_COLORS[garmentIndex % GARMENT_COLORS.length];
        const material = new THREE.MeshStandardMaterial({
          color,
          roughness: 0.75,
          metalness: 0.0,
          side: THREE.DoubleSide,
        });
        mesh = new THREE.Mesh(geometry, material);
        mesh.name = section.name;
        this.meshes.set(section.name, mesh);
        this.scene.add(mesh);
      } else {
        mesh.geometry.setIndex(indices);
      }
      if (section.kind === "garment") {
        garmentIndex += 1;
      }
    }
    for (const [name, mesh] of [...this.meshes]) {
      if (!wanted.has(name)) {
        this.scene.remove(mesh);
        mesh.geometry.dispose();
        this.meshes.delete(name);
      }
    }
  }

  /** Copy payload arrays into GPU buffers; no geometry math happens here. */
  showFrame(frame: GeometryFrame): void {
    for (const section of frame.sections.values()) {
      if (section.kind === KIND_JOINTS) {
        this.updateSkeleton(section.positions);
        continue;
      }
      const mesh = this.meshes.get(section.name);
      if (!mesh) {
        continue; // topology for a new garment arrives right after
      }
      const position = mesh.geometry.getAttribute("position") as THREE.BufferAttribute;
      const normal = mesh.geometry.getAttribute("normal") as THREE.BufferAttribute;
      if (position.array.length !== section.positions.length) {
        mesh.geometry.setAttribute("position", new THREE.BufferAttribute(section.positions.slice(), 3));
        mesh.geometry.setAttribute("normal", new THREE.BufferAttribute(section.normals.slice(), 3));
      } else {
        (position.array as Float32Array).set(section.positions);
        (normal.array as Float32Array).set(section.normals);
        position.needsUpdate = true;
        normal.needsUpdate = true;
      }
      mesh.geometry.computeBoundingSphere();
    }
  }

  private updateSkeleton(joints: Float32Array): void {
    const segments: number[] = [];
    for (let j = 0; j < this.jointParents.length; j++) {
      const parent = this.jointParents[j];
      if (parent < 0) {
        continue;
      }
      segments.push(
        joints[parent * 3], joints[parent * 3 + 1], joints[parent * 3 + 2],
        joints[j * 3], joints[j * 3 + 1], joints[j * 3 + 2],
      );
    }
    if (!this.skeletonLines) {
      const geometry = new THREE.BufferGeometry();
      geometry.setAttribute("position", new THREE.BufferAttribute(new Float32Array(segments), 3));
      this.skeletonLines = new THREE.LineSegments(
        geometry,
        new THREE.LineBasicMaterial({ color: 0x7fd1b9, depthTest: false }),
      );
      this.skeletonLines.renderOrder = 10;
      this.scene.add(this.skeletonLines);
      return;
    }
    const attr = this.skeletonLines.geometry.getAttribute("position") as THREE.BufferAttribute;
    if (attr.array.length !== segments.length) {
      this.skeletonLines.geometry.setAttribute(
        "position",
        new THREE.BufferAttribute(new Float32Array(segments), 3),
      );
    } else {
      (attr.array as Float32Array).set(segments);
      attr.needsUpdate = true;
    }
  }

  render(): void {
    this.controls.update();
    this.renderer.render(this.scene, this.camera);
  }
}
